//! Finite-difference checks: a hand-written composite function, then the
//! library's full suite (ops, layers and the whole model in every bridge
//! configuration).

use cer::tensor::{init_param, GradChecker, ParamStore, Rng};
use cer::train::gradcheck_suite;

fn main() -> cer::Result<()> {
    let mut rng = Rng::new(3);
    let mut store = ParamStore::new();
    let a = store.add("a", init_param(&[4, 5], &mut rng)?)?;
    let v = store.add("v", init_param(&[5], &mut rng)?)?;
    let check = GradChecker::default().check("softmax(a v) cross entropy", &mut store, |tape, store| {
        let a = tape.param(store, a);
        let v = tape.param(store, v);
        let h = tape.matmul(a, v)?;
        let h = tape.sigmoid(h);
        tape.softmax_cross_entropy(h, 2)
    })?;
    println!("{}: max relative error {:.2e} over {} entries", check.name, check.max_rel_error, check.checked);

    let results = gradcheck_suite(None)?;
    for r in &results {
        println!("{:<32} {:.2e} {}", r.name, r.max_rel_error, if r.passed() { "ok" } else { "FAIL" });
    }
    println!("{} of {} components pass", results.iter().filter(|r| r.passed()).count(), results.len());
    Ok(())
}
