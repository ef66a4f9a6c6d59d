use stagfd::grid::StaggeredGrid;
use stagfd::linops::{build_interp_set, ConstraintPolicy};
use stagfd::mapping::MappingSpec;

fn main() {
    let grid = StaggeredGrid::build(&MappingSpec::sinusoidal_skew(1.0, 0.08, 0.05), 16, 16, 4).unwrap();
    match build_interp_set(&grid, 4, ConstraintPolicy::Corrected { threshold: 1e-10 }) {
        Ok(s) => println!("ok, residual {:.3e}", s.constraint_residual),
        Err(e) => println!("error: {e}"),
    }
}
