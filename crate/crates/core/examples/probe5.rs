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
    for mm in [16usize, 32, 64] {
        let grid = StaggeredGrid::build(&MappingSpec::sinusoidal_skew(1.0, 0.08, 0.05), mm, mm, 4).unwrap();
        let tau = std::f64::consts::TAU;
        for width in [4usize, 6, 8] {
            let off: Vec<i64> = (-(width as i64)/2+1..=(width as i64)/2).collect();
            let nodes: Vec<f64> = off.iter().map(|&o| o as f64).collect();
            let bw = lagrange(&nodes[ (width-4)/2 .. (width-4)/2+4 ], 0.5);
            let mut max_delta = 0.0f64;
            let mut max_err = 0.0f64;
            let mut max_post = 0.0f64;
            for iy in 0..mm { for ix in 0..mm {
                let i = ix + mm*iy;
                let cols: Vec<usize> = off.iter().map(|&o| ((ix as i64 + o).rem_euclid(mm as i64)) as usize + mm*iy).collect();
                let mut w0 = vec![0.0; width];
                w0[(width-4)/2..(width-4)/2+4].copy_from_slice(&bw);
                let srcs = [vec![1.0; mm*mm], grid.ryx_at_c.clone(), grid.ryy_at_c.clone()];
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
                max_delta = max_delta.max(delta.amax());
                let mut post = 0.0f64;
                for r in 0..3 {
                    let mut acc = -rhs[r];
                    for j in 0..width { acc += c[(r,j)]*(w0[j]+delta[j]); }
                    post = post.max(acc.abs());
                }
                max_post = max_post.max(post);
                // interp error on sin(2 pi xi / L)
                let mut got = 0.0;
                for (j, &cc) in cols.iter().enumerate() {
                    let xj = (cc % mm) as f64 * grid.dxi;
                    got += (w0[j]+delta[j]) * (tau*xj/grid.length).sin();
                }
                let xe = (ix as f64 + 0.5)*grid.dxi;
                max_err = max_err.max((got - (tau*xe/grid.length).sin()).abs());
            }}
            println!("m={mm} width={width}: max|delta|={max_delta:.3e} max_err={max_err:.3e} max_post={max_post:.3e}");
        }
    }
}
