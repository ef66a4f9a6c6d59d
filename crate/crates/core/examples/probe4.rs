use nalgebra::{DMatrix, DVector};
use stagfd::grid::StaggeredGrid;
use stagfd::mapping::MappingSpec;

fn lagrange(nodes: &[f64], t: f64) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![1.0; n];
    for j in 0..n {
        for p in 0..n {
            if p != j { w[j] *= (t - nodes[p]) / (nodes[j] - nodes[p]); }
        }
    }
    w
}

fn main() {
    let m = 16usize;
    let grid = StaggeredGrid::build(&MappingSpec::sinusoidal_skew(1.0, 0.08, 0.05), m, m, 4).unwrap();
    // C2E row at (6, 11): width 4, offsets -1..=2 (c-points), eval at 0.5.
    let (ix, iy) = (6usize, 11usize);
    let i = ix + m*iy;
    for width in [4usize, 6, 8] {
        let off: Vec<i64> = (-(width as i64)/2+1..=(width as i64)/2).collect();
        let cols: Vec<usize> = off.iter().map(|&o| ((ix as i64 + o).rem_euclid(m as i64)) as usize + m*iy).collect();
        let nodes: Vec<f64> = off.iter().map(|&o| o as f64).collect();
        let base_nodes: Vec<f64> = (-1..=2).map(|o| o as f64).collect();
        let bw = lagrange(&base_nodes, 0.5);
        let mut w0 = vec![0.0; width];
        let shift = (width-4)/2;
        w0[shift..shift+4].copy_from_slice(&bw);
        let _ = nodes;

        let srcs = [vec![1.0; m*m], grid.ryx_at_c.clone(), grid.ryy_at_c.clone()];
        let dsts = [1.0, grid.ryx_at_e[i], grid.ryy_at_e[i]];
        let mut c = DMatrix::zeros(3, width);
        let mut rhs = DVector::zeros(3);
        for (r, s) in srcs.iter().enumerate() {
            for (j, &cc) in cols.iter().enumerate() { c[(r, j)] = s[cc]; }
            rhs[r] = dsts[r];
        }
        let mut resid = rhs.clone();
        for j in 0..width { for r in 0..3 { resid[r] -= c[(r,j)]*w0[j]; } }
        let svd = c.clone().svd(true, true);
        let delta = svd.solve(&resid, 1e-10*svd.singular_values.amax()).unwrap();
        println!("width {width}: sigma = {:?}", svd.singular_values.as_slice());
        println!("  pre-resid {:.3e}, |delta|_max = {:.3e}", resid.amax(), delta.amax());
    }
    // values of ryx along the stencil
    let vals: Vec<f64> = (-2i64..=3).map(|o| grid.ryx_at_c[((ix as i64+o).rem_euclid(m as i64)) as usize + m*iy]).collect();
    println!("ryx_at_c along stencil: {:?}", vals);
    println!("target ryx_at_e = {}", grid.ryx_at_e[i]);
    let vals: Vec<f64> = (-2i64..=3).map(|o| grid.ryy_at_c[((ix as i64+o).rem_euclid(m as i64)) as usize + m*iy]).collect();
    println!("ryy_at_c along stencil: {:?}", vals);
    println!("target ryy_at_e = {}", grid.ryy_at_e[i]);
}
