//! Sample an OSNAP sketch, apply it, and check how well it preserves norms.

use ltm::rng::stream_rng;
use ltm::sketch::{embedding_distortion_test, sample_sketch, SketchSpec};
use nalgebra::DMatrix;
use rand::Rng;

pub struct SketchSummary {
    pub max_apply_error: f64,
    pub distortion: f64,
    pub min_load: usize,
    pub max_load: usize,
}

pub fn run_example() -> ltm::Result<SketchSummary> {
    let (n, d, m, s) = (4000, 8, 200, 4);
    let dec = sample_sketch(&SketchSpec::sparse(n, m, s, 7))?;

    let mut rng = stream_rng(1, 0);
    let a = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));

    // streaming application agrees with the explicit m × n product
    let streamed = dec.apply_uniform(&a)?;
    let explicit = dec.assemble() * &a;
    let max_apply_error = (&streamed - &explicit).amax();

    let distortion = embedding_distortion_test(&dec, &a, 2, 20, &mut rng)?;
    let loads = dec.row_loads();
    Ok(SketchSummary {
        max_apply_error,
        distortion,
        min_load: *loads.iter().min().unwrap(),
        max_load: *loads.iter().max().unwrap(),
    })
}

#[allow(dead_code)]
fn main() -> ltm::Result<()> {
    let r = run_example()?;
    println!("streamed vs explicit: max |diff| = {:.2e}", r.max_apply_error);
    println!("worst residual distortion over 20 subspaces: {:.3}", r.distortion);
    println!("row loads in [{}, {}]", r.min_load, r.max_load);
    Ok(())
}
