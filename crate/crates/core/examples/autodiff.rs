//! Reverse-mode differentiation and Adam on a tiny regression problem.
//!
//! Fits `y = tanh(x W + b)` to targets from a hidden teacher, then prints the
//! analytic gradient of the initial loss next to a finite-difference estimate.

use cer::tensor::{init_param, AdamConfig, AdamState, ParamStore, Rng, Tape, Tensor, Var};

fn loss(tape: &mut Tape<f64>, store: &ParamStore<f64>, x: &Tensor<f64>, y: &Tensor<f64>) -> cer::Result<Var> {
    let w = tape.param(store, store.id("w").unwrap());
    let b = tape.param(store, store.id("b").unwrap());
    let x = tape.constant(x);
    let y = tape.constant(y);
    let xw = tape.matmul(x, w)?;
    let z = tape.add_bias(xw, b)?;
    let pred = tape.tanh(z);
    let diff = tape.sub(pred, y)?;
    let sq = tape.mul(diff, diff)?;
    let total = tape.sum(sq);
    Ok(tape.scale(total, 1.0 / 8.0))
}

fn main() -> cer::Result<()> {
    let mut rng = Rng::new(7);
    let x = Tensor::from_f64(vec![8, 3], &(0..24).map(|_| rng.uniform_range(-1.0, 1.0)).collect::<Vec<_>>())?;
    let teacher = [0.8, -0.5, 0.3];
    let y: Vec<f64> = (0..8)
        .map(|r| (0..3).map(|c| x.at(r, c) * teacher[c]).sum::<f64>().tanh())
        .collect();
    let y = Tensor::matrix(8, 1, y)?;

    let mut store = ParamStore::new();
    store.add("w", init_param(&[3, 1], &mut rng)?)?;
    store.add("b", Tensor::zeros(vec![1])?.with_grad(true))?;

    let mut tape = Tape::new();
    let l = loss(&mut tape, &store, &x, &y)?;
    tape.backward(l, &mut store)?;
    let w_id = store.id("w").unwrap();
    let h = 1e-6;
    for i in 0..3 {
        let orig = store.get(w_id).data()[i];
        let mut eval = |v: f64| {
            store.get_mut(w_id).data_mut()[i] = v;
            let mut t = Tape::new();
            let l = loss(&mut t, &store, &x, &y).unwrap();
            t.scalar(l)
        };
        let numeric = (eval(orig + h) - eval(orig - h)) / (2.0 * h);
        store.get_mut(w_id).data_mut()[i] = orig;
        println!("dL/dw[{i}]  tape {:+.9}  finite difference {numeric:+.9}", store.get(w_id).grad().unwrap()[i]);
    }

    let ids: Vec<_> = store.ids().collect();
    let mut adam = AdamState::new(&store, ids, AdamConfig::with_lr(0.05));
    for step in 0..=300 {
        store.zero_grad();
        let mut tape = Tape::new();
        let l = loss(&mut tape, &store, &x, &y)?;
        if step % 100 == 0 {
            println!("step {step:3}  loss {:.3e}", tape.scalar(l));
        }
        tape.backward(l, &mut store)?;
        adam.step(&mut store);
    }
    println!("learned w = {:.3?} (teacher {teacher:?})", store.get(w_id).data());
    Ok(())
}
