use bioconv_core::OxygenTopBc;
use bioconv_core::grid::{MacGrid, ScalarField, VectorField};
use bioconv_core::model::{ConsumptionFunction, DimensionlessGroups, SourceData};
use bioconv_core::solver::{PicardOptions, ProblemData};
use bioconv_core::verify::oracle_equivalence;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let grid = MacGrid::cube(1.0, 8);
    let pi = std::f64::consts::PI;
    let f_n = ScalarField::from_fn(&grid, |p| 0.02 * (pi * p[0]).cos() * (pi * p[2]).cos());
    let f_c = ScalarField::from_fn(&grid, |p| 0.02 * (pi * p[1]).cos() * (pi * p[2]).cos());
    let force = VectorField::zeros(&grid);
    let sources = SourceData::new(f_n, f_c, force, 0.5, 0.2, true).unwrap();
    let prob = ProblemData {
        grid,
        groups: DimensionlessGroups { s_c: 1.0, gamma: 0.1, chi: 0.05, delta: 1.0, beta: 0.05 },
        g_accel: 1.0,
        r: ConsumptionFunction::bump(0.3, 0.1).unwrap(),
        sources,
        oxygen_top: OxygenTopBc::Neumann,
    };
    let opts = PicardOptions { tol: 1e-11, ..Default::default() };
    let report = oracle_equivalence(&prob, &opts).unwrap();
    println!("newton: converged={} iters={} residual={:.3e}", report.newton.converged, report.newton.iterations, report.newton.residual);
    println!("picard converged: {}", report.picard_converged);
    println!("discrepancy: {:?}", report.discrepancy);
    println!("elapsed: {:.1}s", t0.elapsed().as_secs_f64());
}
