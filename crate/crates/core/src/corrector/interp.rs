use super::grid::Axis;
use super::CorrectorProfile;

/// `w` and its first and second partial derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileJet {
    pub w: f64,
    pub w_r: f64,
    pub w_t: f64,
    pub w_rr: f64,
    pub w_rt: f64,
    pub w_tt: f64,
}

/// Values and first two derivatives of the four cubic Lagrange basis
/// polynomials on the nodes `0, 1, 2, 3`, evaluated at `u`.
fn lagrange4(u: f64) -> [[f64; 3]; 4] {
    let mut out = [[0.0; 3]; 4];
    for (m, row) in out.iter_mut().enumerate() {
        let others: Vec<f64> = (0..4).filter(|k| *k != m).map(|k| k as f64).collect();
        let denom: f64 = others.iter().map(|k| m as f64 - k).product();
        let d = [u - others[0], u - others[1], u - others[2]];
        let value = d[0] * d[1] * d[2];
        let first = d[1] * d[2] + d[0] * d[2] + d[0] * d[1];
        let second = 2.0 * (d[0] + d[1] + d[2]);
        *row = [value / denom, first / denom, second / denom];
    }
    out
}

/// First node of the four-point window and the local coordinate within it.
fn window(axis: &Axis, x: f64, mirror: bool) -> (isize, f64, f64) {
    let n = axis.intervals as isize;
    let xi = axis.inverse(x);
    let scaled = xi * n as f64;
    let lo = if mirror { -1 } else { 0 };
    let k0 = (scaled.floor() as isize - 1).clamp(lo, n - 3);
    (k0, scaled - k0 as f64, xi)
}

pub(super) fn cubic_jet(p: &CorrectorProfile, r: f64, t: f64) -> ProfileJet {
    let (kr, ur, xir) = window(&p.grid.r, r, true);
    let (kt, ut, xit) = window(&p.grid.t, t, false);
    let br = lagrange4(ur);
    let bt = lagrange4(ut);
    let mut acc = [[0.0; 3]; 3];
    for a in 0..4 {
        let i = (kr + a as isize).unsigned_abs();
        for b in 0..4 {
            let j = (kt + b as isize) as usize;
            let v = p.node_value(i, j);
            for (dr, row) in acc.iter_mut().enumerate() {
                for (dt, cell) in row.iter_mut().enumerate() {
                    if dr + dt <= 2 {
                        *cell += br[a][dr] * bt[b][dt] * v;
                    }
                }
            }
        }
    }
    let nr = p.grid.r.intervals as f64;
    let nt = p.grid.t.intervals as f64;
    let (xr1, xr2) = p.grid.r.map_derivatives(xir);
    let (xt1, xt2) = p.grid.t.map_derivatives(xit);
    // Derivatives in xi from derivatives in the window coordinate u.
    let w_xir = acc[1][0] * nr;
    let w_xit = acc[0][1] * nt;
    let w_r = w_xir / xr1;
    let w_t = w_xit / xt1;
    ProfileJet {
        w: acc[0][0],
        w_r,
        w_t,
        w_rr: (acc[2][0] * nr * nr - xr2 * w_r) / (xr1 * xr1),
        w_rt: acc[1][1] * nr * nt / (xr1 * xt1),
        w_tt: (acc[0][2] * nt * nt - xt2 * w_t) / (xt1 * xt1),
    }
}
