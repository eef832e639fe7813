mod common;

use cer::nn::*;
use cer::tensor::{GradChecker, ParamId, ParamStore, Rng, Tape, Tensor, Var};
use cer::Error;
use common::{assert_close, flat, gru_pass, gru_step, pair_features, randomize, random_mat, random_vec, tensor, unflat, Mat};
use proptest::prelude::*;

fn gru(seed: u64, d_in: usize, d_h: usize) -> (ParamStore<f64>, GruParams) {
    let mut store = ParamStore::new();
    let p = GruParams::new(&mut Initializer::new(&mut store, seed), d_in, d_h).unwrap();
    randomize(&mut store, seed + 100);
    (store, p)
}

fn bi(seed: u64, d_in: usize, h: usize) -> (ParamStore<f64>, BiGruParams) {
    let mut store = ParamStore::new();
    let p = BiGruParams::new(&mut Initializer::new(&mut store, seed), d_in, h).unwrap();
    randomize(&mut store, seed + 100);
    (store, p)
}

fn copy_param(store: &mut ParamStore<f64>, from: ParamId, to: ParamId) {
    let v = store.get(from).data().to_vec();
    store.get_mut(to).data_mut().copy_from_slice(&v);
}

/// Makes the backward direction a copy of the forward one.
fn tie_directions(store: &mut ParamStore<f64>, p: &BiGruParams) {
    let (f, b) = (&p.forward, &p.backward);
    for (x, y) in [
        (f.w_z, b.w_z),
        (f.w_r, b.w_r),
        (f.w_h, b.w_h),
        (f.u_z, b.u_z),
        (f.u_r, b.u_r),
        (f.u_h, b.u_h),
        (f.b_z, b.b_z),
        (f.b_r, b.b_r),
        (f.b_h, b.b_h),
    ] {
        copy_param(store, x, y);
    }
}

fn rows(tape: &Tape<f64>, v: Var) -> Mat {
    unflat(tape.value(v), *tape.shape(v).last().unwrap())
}

fn set_all(store: &mut ParamStore<f64>, id: ParamId, value: f64) {
    store.get_mut(id).data_mut().iter_mut().for_each(|x| *x = value);
}

// ------------------------------------------------------------------- GRU

#[test]
fn gru_cell_matches_scalar_loop() {
    let (store, p) = gru(1, 4, 3);
    let mut rng = Rng::new(2);
    let x = random_vec(&mut rng, 4);
    let h = random_vec(&mut rng, 3);
    let mut tape = Tape::new();
    let xv = tape.constant_vec(x.clone()).unwrap();
    let hv = tape.constant_vec(h.clone()).unwrap();
    let out = gru_cell(&mut tape, &store, xv, hv, &p).unwrap();
    assert_close(tape.value(out), &gru_step(&store, &p, &x, &h), 1e-12);
}

#[test]
fn gru_cell_zero_fixed_point() {
    let (mut store, p) = gru(1, 4, 3);
    for id in store.ids().collect::<Vec<_>>() {
        set_all(&mut store, id, 0.0);
    }
    let mut tape = Tape::new();
    let x = tape.constant_vec(vec![3.0, -1.0, 0.25, 9.0]).unwrap();
    let h = tape.zeros(&[3]);
    let out = gru_cell(&mut tape, &store, x, h, &p).unwrap();
    assert_eq!(tape.value(out), &[0.0; 3]);
}

#[test]
fn gru_cell_rejects_mismatched_input() {
    let (store, p) = gru(1, 4, 3);
    let mut tape = Tape::new();
    let x = tape.zeros(&[5]);
    let h = tape.zeros(&[3]);
    assert!(gru_cell(&mut tape, &store, x, h, &p).is_err());
    let x = tape.zeros(&[4]);
    let h = tape.zeros(&[2]);
    assert!(gru_cell(&mut tape, &store, x, h, &p).is_err());
}

#[test]
fn gru_cell_input_gradient_matches_finite_differences() {
    let (store, p) = gru(3, 4, 3);
    let mut rng = Rng::new(4);
    let x0 = random_vec(&mut rng, 4);
    let h = random_vec(&mut rng, 3);
    let oracle = store.clone();
    let sum_h = |x: &[f64]| gru_step(&oracle, &p, x, &h).iter().sum::<f64>();

    let mut store = store;
    let xid = store.add("x", Tensor::vector(x0.clone()).unwrap().with_grad(true)).unwrap();
    let mut tape = Tape::new();
    let xv = tape.param(&store, xid);
    let hv = tape.constant_vec(h.clone()).unwrap();
    let out = gru_cell(&mut tape, &store, xv, hv, &p).unwrap();
    let l = tape.sum(out);
    tape.backward(l, &mut store).unwrap();
    let analytic = store.get(xid).grad().unwrap().to_vec();
    for i in 0..4 {
        let mut up = x0.clone();
        let mut down = x0.clone();
        up[i] += 1e-5;
        down[i] -= 1e-5;
        let numeric = (sum_h(&up) - sum_h(&down)) / 2e-5;
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-6);
        assert!(rel < 1e-4, "x[{i}]: analytic {} numeric {numeric}", analytic[i]);
    }
}

#[test]
fn gru_sequence_matches_step_loop_both_directions() {
    let (store, p) = gru(5, 3, 4);
    let xs = random_mat(&mut Rng::new(6), 6, 3);
    for reverse in [false, true] {
        let mut tape = Tape::new();
        let x = tape.constant(&tensor(&xs));
        let out = gru_sequence(&mut tape, &store, x, &p, reverse).unwrap();
        assert_close(tape.value(out), &flat(&gru_pass(&store, &p, &xs, reverse)), 1e-12);
    }
}

#[test]
fn bigru_matches_two_pass_oracle() {
    let (store, p) = bi(7, 3, 4);
    let xs = random_mat(&mut Rng::new(8), 5, 3);
    let mut tape = Tape::new();
    let x = tape.constant(&tensor(&xs));
    let out = bigru(&mut tape, &store, x, &p).unwrap();
    assert_eq!(tape.shape(out), &[5, 8]);
    assert_close(tape.value(out), &flat(&common::bigru(&store, &p, &xs)), 1e-12);
}

#[test]
fn bigru_length_one_is_two_independent_cells() {
    let (store, p) = bi(9, 3, 2);
    let x = random_vec(&mut Rng::new(10), 3);
    let mut tape = Tape::new();
    let xv = tape.constant(&Tensor::matrix(1, 3, x.clone()).unwrap());
    let out = bigru(&mut tape, &store, xv, &p).unwrap();

    let xv = tape.constant_vec(x).unwrap();
    let h0 = tape.zeros(&[2]);
    let f = gru_cell(&mut tape, &store, xv, h0, &p.forward).unwrap();
    let b = gru_cell(&mut tape, &store, xv, h0, &p.backward).unwrap();
    let expected = [tape.value(f), tape.value(b)].concat();
    assert_eq!(tape.value(out), expected.as_slice());
}

#[test]
fn bigru_palindrome_with_tied_directions() {
    let (mut store, p) = bi(11, 2, 3);
    tie_directions(&mut store, &p);
    let half = random_mat(&mut Rng::new(12), 3, 2);
    let mut xs = half.clone();
    xs.extend(half.iter().rev().skip(1).cloned());
    let mut tape = Tape::new();
    let x = tape.constant(&tensor(&xs));
    let out = bigru(&mut tape, &store, x, &p).unwrap();
        let out = rows(&tape, out);
    let n = out.len();
    for t in 0..n {
        let swapped = [&out[n - 1 - t][3..], &out[n - 1 - t][..3]].concat();
        assert_eq!(out[t], swapped, "position {t}");
    }
}

#[test]
fn bigru_rejects_empty_sequence() {
    let (store, p) = bi(13, 2, 3);
    let mut tape = Tape::new();
    let x = tape.zeros(&[0, 2]);
    assert!(matches!(bigru(&mut tape, &store, x, &p), Err(Error::Argument(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bigru_reversal_swaps_halves(len in 1usize..7, seed in 0u64..1000) {
        let (store, p) = bi(seed, 2, 3);
        let xs = random_mat(&mut Rng::new(seed + 1), len, 2);
        let mut tape = Tape::new();
        let x = tape.constant(&tensor(&xs));
        let out = bigru(&mut tape, &store, x, &p).unwrap();
        let out = rows(&tape, out);

        // Swap direction parameters, then feed the reversed sequence.
        let (f, b) = (p.forward.clone(), p.backward.clone());
        let swapped = BiGruParams { forward: b, backward: f };
        let rev: Mat = xs.iter().rev().cloned().collect();
        let mut tape = Tape::new();
        let x = tape.constant(&tensor(&rev));
        let out_rev = bigru(&mut tape, &store, x, &swapped).unwrap();
        let out_rev = rows(&tape, out_rev);
        for t in 0..len {
            let expected = [&out[len - 1 - t][3..], &out[len - 1 - t][..3]].concat();
            prop_assert_eq!(&out_rev[t], &expected);
        }
    }

    #[test]
    fn bigru_width_is_twice_hidden(len in 1usize..9, d_in in 1usize..5, h in 1usize..6) {
        let (store, p) = bi(len as u64, d_in, h);
        let mut tape = Tape::new();
        let x = tape.constant(&tensor(&random_mat(&mut Rng::new(1), len, d_in)));
        let out = bigru(&mut tape, &store, x, &p).unwrap();
        prop_assert_eq!(tape.shape(out), &[len, 2 * h]);
        prop_assert_eq!(p.output_dim(), 2 * h);
    }
}

// ------------------------------------------------------------- attention

fn pool(seed: u64, dim: usize) -> (ParamStore<f64>, AttnPoolParams) {
    let mut store = ParamStore::new();
    let p = AttnPoolParams::new(&mut Initializer::new(&mut store, seed), dim).unwrap();
    randomize(&mut store, seed + 100);
    (store, p)
}

#[test]
fn attention_pool_examples() {
    let (store, p) = pool(1, 3);
    let mut tape = Tape::new();
    let h = vec![0.3, -0.7, 1.1];
    let one = tape.constant(&Tensor::matrix(1, 3, h.clone()).unwrap());
    let (u, a) = attention_pool(&mut tape, &store, one, &p).unwrap();
    assert_eq!(tape.value(a), &[1.0]);
    assert_eq!(tape.value(u), h.as_slice());

    let two = tape.constant(&Tensor::matrix(2, 3, [h.clone(), h.clone()].concat()).unwrap());
    let (u, a) = attention_pool(&mut tape, &store, two, &p).unwrap();
    assert_eq!(tape.value(a), &[0.5, 0.5]);
    assert_close(tape.value(u), &h, 1e-15);
}

#[test]
fn attention_pool_matches_direct_formula() {
    let (store, p) = pool(2, 6);
    let hs = random_mat(&mut Rng::new(3), 4, 6);
    let mut tape = Tape::new();
    let x = tape.constant(&tensor(&hs));
    let (u, a) = attention_pool(&mut tape, &store, x, &p).unwrap();
    let (u_ref, a_ref) = common::attention_pool(&store, &p, &hs);
    assert_close(tape.value(a), &a_ref, 1e-12);
    assert_close(tape.value(u), &u_ref, 1e-12);
}

#[test]
fn attention_pool_rejects_empty_and_mismatched() {
    let (store, p) = pool(4, 3);
    let mut tape = Tape::new();
    let empty = tape.zeros(&[0, 3]);
    assert!(matches!(attention_pool(&mut tape, &store, empty, &p), Err(Error::Argument(_))));
    let wrong = tape.zeros(&[2, 4]);
    assert!(matches!(attention_pool(&mut tape, &store, wrong, &p), Err(Error::Dimension { .. })));
}

// ------------------------------------------------------------------ gate

fn gate_params(seed: u64, dim: usize) -> (ParamStore<f64>, GateParams) {
    let mut store = ParamStore::new();
    let p = GateParams::new(&mut Initializer::new(&mut store, seed), dim).unwrap();
    randomize(&mut store, seed + 100);
    (store, p)
}

fn run_gate(store: &ParamStore<f64>, p: &GateParams, task: &[f64], shared: &[f64]) -> Vec<f64> {
    let mut tape = Tape::new();
    let t = tape.constant_vec(task.to_vec()).unwrap();
    let s = tape.constant_vec(shared.to_vec()).unwrap();
    let out = gate_fuse(&mut tape, store, t, s, p).unwrap();
    tape.value(out).to_vec()
}

#[test]
fn gate_examples() {
    let (mut store, p) = gate_params(1, 3);
    let task = [1.0, -2.0, 0.5];
    let shared = [3.0, 1.0, -0.5];

    set_all(&mut store, p.w_g, 0.0);
    set_all(&mut store, p.b_g, 0.0);
    assert_eq!(run_gate(&store, &p, &task, &shared), vec![2.0, -0.5, 0.0]);

    set_all(&mut store, p.b_g, 20.0);
    assert_close(&run_gate(&store, &p, &task, &shared), &shared, 1e-8);

    let (store, p) = gate_params(2, 3);
    assert_eq!(run_gate(&store, &p, &task, &task), task.to_vec());
}

#[test]
fn gate_matches_textbook_form() {
    let (store, p) = gate_params(3, 5);
    let mut rng = Rng::new(4);
    let task = random_vec(&mut rng, 5);
    let shared = random_vec(&mut rng, 5);
    assert_close(&run_gate(&store, &p, &task, &shared), &common::gate(&store, &p, &task, &shared), 1e-12);
}

#[test]
fn gate_rejects_mismatch() {
    let (store, p) = gate_params(5, 3);
    let mut tape = Tape::new();
    let a = tape.zeros(&[3]);
    let b = tape.zeros(&[4]);
    assert!(gate_fuse(&mut tape, &store, a, b, &p).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn gate_output_is_convex(
        task in prop::collection::vec(-50.0f64..50.0, 4),
        shared in prop::collection::vec(-50.0f64..50.0, 4),
        seed in 0u64..1000,
    ) {
        let (store, p) = gate_params(seed, 4);
        let out = run_gate(&store, &p, &task, &shared);
        for k in 0..4 {
            let (lo, hi) = (task[k].min(shared[k]), task[k].max(shared[k]));
            prop_assert!(lo <= out[k] && out[k] <= hi, "{} not in [{lo}, {hi}]", out[k]);
        }
    }
}

// -------------------------------------------------------- cross attention

fn bilinear(seed: u64, dim: usize) -> (ParamStore<f64>, BilinearParams) {
    let mut store = ParamStore::new();
    let p = BilinearParams::new(&mut Initializer::new(&mut store, seed), dim).unwrap();
    randomize(&mut store, seed + 100);
    (store, p)
}

fn run_cross(store: &ParamStore<f64>, p: &BilinearParams, tgt: &Mat, src: &Mat) -> (Mat, Mat) {
    let mut tape = Tape::new();
    let t = tape.constant(&tensor(tgt));
    let s = tape.constant(&tensor(src));
    let out = cross_attend(&mut tape, store, t, s, p).unwrap();
    (rows(&tape, out.output), rows(&tape, out.beta))
}

#[test]
fn cross_attend_examples() {
    let (mut store, p) = bilinear(1, 2);
    let (out, beta) = run_cross(&store, &p, &vec![vec![1.0, 2.0]], &vec![vec![-3.0, 0.5]]);
    assert_eq!(beta, vec![vec![1.0]]);
    assert_eq!(out, vec![vec![1.0, 2.0, -3.0, 0.5]]);

    set_all(&mut store, p.w_c, 0.0);
    let tgt = random_mat(&mut Rng::new(2), 3, 2);
    let src = vec![vec![1.0, 4.0], vec![2.0, -1.0], vec![3.0, 0.5]];
    let (out, beta) = run_cross(&store, &p, &tgt, &src);
    for (i, row) in out.iter().enumerate() {
        assert_eq!(beta[i], vec![1.0 / 3.0; 3]);
        assert_eq!(&row[..2], tgt[i].as_slice());
        assert_close(&row[2..], &[2.0, 3.5 / 3.0], 1e-15);
    }
}

#[test]
fn cross_attend_matches_double_loop() {
    let (store, p) = bilinear(3, 4);
    let mut rng = Rng::new(4);
    let tgt = random_mat(&mut rng, 3, 4);
    let src = random_mat(&mut rng, 3, 4);
    let (out, beta) = run_cross(&store, &p, &tgt, &src);
    let (out_ref, beta_ref) = common::cross_attend(&store, &p, &tgt, &src);
    assert_close(&flat(&beta), &flat(&beta_ref), 1e-12);
    assert_close(&flat(&out), &flat(&out_ref), 1e-12);
}

#[test]
fn cross_attend_rejects_length_mismatch() {
    let (store, p) = bilinear(5, 2);
    let mut tape = Tape::new();
    let a = tape.zeros(&[3, 2]);
    let b = tape.zeros(&[2, 2]);
    assert!(matches!(cross_attend(&mut tape, &store, a, b, &p), Err(Error::Dimension { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn attention_weights_are_distributions(n in 1usize..8, seed in 0u64..10_000) {
        let mut rng = Rng::new(seed);
        let scale = rng.uniform_range(0.1, 5.0);
        let mut hs = random_mat(&mut rng, n, 4);
        hs.iter_mut().flatten().for_each(|x| *x *= scale);

        let (store, p) = pool(seed, 4);
        let mut tape = Tape::new();
        let x = tape.constant(&tensor(&hs));
        let (_, a) = attention_pool(&mut tape, &store, x, &p).unwrap();
        let alpha = tape.value(a);
        prop_assert!(alpha.iter().all(|&w| w >= 0.0));
        prop_assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let (store, p) = bilinear(seed, 4);
        let src = random_mat(&mut rng, n, 4);
        let (_, beta) = run_cross(&store, &p, &hs, &src);
        for row in beta {
            prop_assert!(row.iter().all(|&w| w >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

// ---------------------------------------------------------- pair features

#[test]
fn pair_features_hand_example() {
    let mut tape = Tape::<f64>::new();
    let a = tape.constant_vec(vec![1.0, -2.0]).unwrap();
    let b = tape.constant_vec(vec![3.0, 1.0]).unwrap();
    let d = si_pair_features(&mut tape, a, b).unwrap();
    assert_eq!(tape.value(d), &[1.0, -2.0, 3.0, 1.0, 2.0, 3.0, 3.0, -2.0]);
    assert_eq!(tape.value(d), pair_features(&[1.0, -2.0], &[3.0, 1.0]).as_slice());
}

proptest! {
    #[test]
    fn pair_features_swap_symmetry(
        (a, b) in (1usize..8).prop_flat_map(|d| (
            prop::collection::vec(-10.0f64..10.0, d),
            prop::collection::vec(-10.0f64..10.0, d),
        )),
    ) {
        let d = a.len();
        let mut tape = Tape::<f64>::new();
        let av = tape.constant_vec(a.clone()).unwrap();
        let bv = tape.constant_vec(b.clone()).unwrap();
        let ab = si_pair_features(&mut tape, av, bv).unwrap();
        let ba = si_pair_features(&mut tape, bv, av).unwrap();
        let (ab, ba) = (tape.value(ab), tape.value(ba));
        prop_assert_eq!(ab.len(), 4 * d);
        prop_assert_eq!(&ab[2 * d..], &ba[2 * d..]);
        prop_assert_eq!(&ab[..d], &ba[d..2 * d]);
        prop_assert_eq!(&ab[d..2 * d], &ba[..d]);
    }
}

// ----------------------------------------------------- finite differences

/// Random positive-weighted readout so every output coordinate matters.
fn readout(tape: &mut Tape<f64>, y: Var, seed: u64) -> Var {
    let shape = tape.shape(y).to_vec();
    let w = random_vec(&mut Rng::new(seed), tape.value(y).len());
    let w = tape.constant(&Tensor::new(shape, w).unwrap());
    let p = tape.mul(y, w).unwrap();
    tape.sum(p)
}

fn check(name: &str, store: &mut ParamStore<f64>, f: impl Fn(&mut Tape<f64>, &ParamStore<f64>) -> cer::Result<Var>) {
    let r = GradChecker::default()
        .check(name, store, |t, s| {
            let y = f(t, s)?;
            Ok(readout(t, y, 77))
        })
        .unwrap();
    assert!(r.passed(), "{name}: {r:?}");
    assert!(r.checked > 0);
}

#[test]
fn layer_parameter_gradients() {
    for seed in 0..5 {
        let xs = random_mat(&mut Rng::new(seed), 4, 3);

        let (mut store, p) = gru(seed, 3, 2);
        check("gru_cell", &mut store, |t, s| {
            let x = t.constant_vec(xs[0].clone())?;
            let h = t.constant_vec(vec![0.2, -0.4])?;
            gru_cell(t, s, x, h, &p)
        });

        let (mut store, p) = bi(seed, 3, 2);
        check("bigru", &mut store, |t, s| {
            let x = t.constant(&tensor(&xs));
            bigru(t, s, x, &p)
        });

        let (mut store, p) = pool(seed, 3);
        check("attention_pool", &mut store, |t, s| {
            let x = t.constant(&tensor(&xs));
            let (u, a) = attention_pool(t, s, x, &p)?;
            t.concat(&[u, a])
        });

        let (mut store, p) = gate_params(seed, 3);
        check("gate_fuse", &mut store, |t, s| {
            let a = t.constant_vec(xs[0].clone())?;
            let b = t.constant_vec(xs[1].clone())?;
            gate_fuse(t, s, a, b, &p)
        });

        let (mut store, p) = bilinear(seed, 3);
        check("cross_attend", &mut store, |t, s| {
            let a = t.constant(&tensor(&xs));
            let b = t.constant(&tensor(&xs.iter().rev().cloned().collect()));
            Ok(cross_attend(t, s, a, b, &p)?.output)
        });
    }
}

#[test]
fn pair_features_input_gradients() {
    for seed in 0..5 {
        let mut rng = Rng::new(seed);
        let mut store = ParamStore::new();
        // Entries kept away from a_k == b_k, where |·| has a kink.
        let a = random_vec(&mut rng, 4);
        let b: Vec<f64> = a.iter().map(|x| x + if rng.below(2) == 0 { 0.5 } else { -0.5 }).collect();
        let ai = store.add("a", Tensor::vector(a).unwrap().with_grad(true)).unwrap();
        let bi = store.add("b", Tensor::vector(b).unwrap().with_grad(true)).unwrap();
        check("si_pair_features", &mut store, |t, s| {
            let (a, b) = (t.param(s, ai), t.param(s, bi));
            si_pair_features(t, a, b)
        });
    }
}
