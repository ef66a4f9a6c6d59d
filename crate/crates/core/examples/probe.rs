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
    let grid = StaggeredGrid::build(&MappingSpec::sinusoidal_skew(1.0, 0.08, 0.05), 16, 16, 4).unwrap();
    let (mx, _my) = (grid.mx, grid.my);
    // E2C row at (ix=5, iy=3), width 6, offsets -3..=2, nodes o+0.5, eval 0
    let (ix, iy) = (5usize, 3usize);
    let i = ix + mx*iy;
    let width = 6usize;
    let offsets: Vec<i64> = (-3..=2).collect();
    let cols: Vec<usize> = offsets.iter().map(|&o| ((ix as i64 + o).rem_euclid(mx as i64)) as usize + mx*iy).collect();
    let base_nodes: Vec<f64> = (-2..=1).map(|o| o as f64 + 0.5).collect();
    let bw = lagrange(&base_nodes, 0.0);
    let mut w0 = vec![0.0; width];
    w0[1..5].copy_from_slice(&bw);

    let prod = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x,y)| x*y).collect() };
    let srcs: Vec<Vec<f64>> = vec![
        vec![1.0; grid.num_cells()],
        grid.rxx_at_e.clone(),
        grid.rxy_at_e.clone(),
        prod(&grid.rxx_at_e, &grid.rxx_at_e),
        prod(&grid.rxx_at_e, &grid.rxy_at_e),
        prod(&grid.rxy_at_e, &grid.rxy_at_e),
    ];
    let dsts: Vec<f64> = vec![
        1.0,
        grid.rxx_at_c[i],
        grid.rxy_at_c[i],
        grid.rxx_at_c[i]*grid.rxx_at_c[i],
        grid.rxx_at_c[i]*grid.rxy_at_c[i],
        grid.rxy_at_c[i]*grid.rxy_at_c[i],
    ];
    let ncon = srcs.len();
    let mut cmat = DMatrix::zeros(ncon, width);
    let mut rhs = DVector::zeros(ncon);
    for (r, src) in srcs.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() { cmat[(r, j)] = src[c]; }
        rhs[r] = dsts[r];
    }
    let mut resid = rhs.clone();
    for j in 0..width { for r in 0..ncon { resid[r] -= cmat[(r,j)] * w0[j]; } }
    println!("pre-residual = {:.3e}", resid.amax());
    let svd = cmat.clone().svd(true, true);
    println!("singular values: {:?}", svd.singular_values.as_slice());
    let smax = svd.singular_values.amax();
    for cutfac in [1e-10f64, 1e-8, 1e-6, 1e-4] {
        let delta = svd.solve(&resid, cutfac*smax).unwrap();
        let mut post: f64 = 0.0;
        for r in 0..ncon {
            let mut acc = -rhs[r];
            for j in 0..width { acc += cmat[(r,j)] * (w0[j] + delta[j]); }
            post = post.max(acc.abs());
        }
        println!("cutoff {:.1e}: |delta| = {:.3e}, post-residual = {:.3e}", cutfac, delta.amax(), post);
    }
}
