//! A small reproducible sweep over mechanisms and dataset sizes, printed as CSV.

use ltm::experiments::sweep::write_results_csv;
use ltm::experiments::{sweep, CalibrationPolicy, Mechanism, NGrid, SweepConfig, Task};

pub fn config() -> SweepConfig {
    SweepConfig {
        task: Task::Lowrank { d: 10, k: 2 },
        mechanisms: vec![Mechanism::Central, Mechanism::LtmGaussian, Mechanism::LtmLaplace, Mechanism::Local],
        p_values: vec![1.0],
        epsilons: vec![1.0],
        delta: 1e-6,
        n_grid: NGrid::List(vec![2_000, 20_000]),
        runs: 3,
        seed: 2024,
        m: 20,
        s: 1,
        calibration: CalibrationPolicy::default(),
        central_noise: Default::default(),
        dataset: None,
        threads: None,
    }
}

pub fn run_example() -> ltm::Result<String> {
    let out = sweep(&config())?;
    let mut buf = Vec::new();
    write_results_csv(&mut buf, &out.rows)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

#[allow(dead_code)]
fn main() -> ltm::Result<()> {
    print!("{}", run_example()?);
    Ok(())
}
