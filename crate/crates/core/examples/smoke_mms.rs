use bioconv_core::solver::PicardOptions;
use bioconv_core::verify::convergence_study;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let opts = PicardOptions { tol: 1e-11, ..Default::default() };
    let table = convergence_study("stratified", &[8, 16, 32], &opts).unwrap();
    println!("{}", table.to_text());
    println!("elapsed: {:.1}s", t0.elapsed().as_secs_f64());
}
