use stagfd::grid::StaggeredGrid;
use stagfd::linops::{build_interp_set, ConstraintPolicy};
use stagfd::mapping::MappingSpec;

fn main() {
    let m = 16usize;
    let grid = StaggeredGrid::build(&MappingSpec::sinusoidal_skew(1.0, 0.08, 0.05), m, m, 4).unwrap();
    let set = build_interp_set(&grid, 4, ConstraintPolicy::Corrected { threshold: 1e-10 }).unwrap();
    let plain = build_interp_set(&grid, 4, ConstraintPolicy::PlainLagrange).unwrap();
    println!("residual corrected: {:.3e}", set.constraint_residual);
    let tau = std::f64::consts::TAU;
    let l = grid.length;
    let f_c: Vec<f64> = (0..m*m).map(|i| (tau * ((i % m) as f64 * grid.dxi) / l).sin()).collect();
    for (name, op) in [("corrected", &set.c2e), ("plain", &plain.c2e)] {
        let got = op.apply(&f_c);
        let mut worst = (0.0f64, 0usize);
        for i in 0..m*m {
            let xi_e = (i % m) as f64 * grid.dxi + 0.5*grid.dxi;
            let e = (got[i] - (tau * xi_e / l).sin()).abs();
            if e > worst.0 { worst = (e, i); }
        }
        println!("{name}: max interp err {:.3e} at i={} (ix={},iy={})", worst.0, worst.1, worst.1 % m, worst.1 / m);
    }
    // per-row nnz histogram of corrected c2e
    let entries = set.c2e.entries();
    let mut per_row = vec![0usize; m*m];
    for (r, _, _) in &entries { per_row[*r] += 1; }
    let mut hist = std::collections::BTreeMap::new();
    for c in per_row { *hist.entry(c).or_insert(0usize) += 1; }
    println!("c2e row-nnz histogram: {:?}", hist);
    // difference between corrected and plain rows
    let diff = set.c2e.max_entry_diff(&plain.c2e);
    println!("max |corrected - plain| entry: {:.3e}", diff);
}
