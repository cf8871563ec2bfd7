//! The speed constant `c0` and the first-order corrector shape `V`:
//! `V'' + f'(U0) V = -df/dv(U0, 0) - c0 U0'`, `V(0) = 0`, `V` bounded.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::BistableModel;
use crate::numeric::{integrate, trapezoid};

use super::wave::{hermite, StandingWave};

#[derive(Debug, Clone)]
pub struct Corrector {
    pub c0: f64,
    pub v: Vec<f64>,
    pub dv: Vec<f64>,
    pub d2v: Vec<f64>,
    /// `sup |V|`.
    pub m_bound: f64,
    /// `|V'(z)| + |V''(z)| <= deriv_bound * exp(-deriv_rate |z|)` on the table.
    pub deriv_bound: f64,
    pub deriv_rate: f64,
    /// `|<U0', g>| / sup|g|` in the discrete inner product.
    pub fredholm_residual: f64,
    pub v_far_minus: f64,
    pub v_far_plus: f64,
}

const FREDHOLM_TOL: f64 = 1e-8;
const SOLVE_TOL: f64 = 1e-8;

/// `c0` from the wave, including the exponential tails beyond the table.
pub fn wave_c0(model: &BistableModel, wave: &StandingWave) -> f64 {
    let last = wave.len() - 1;
    let fv: Vec<f64> = wave.u0.iter().map(|&u| model.df_dv(u, 0.0)).collect();
    let prod: Vec<f64> = fv.iter().zip(&wave.du0).map(|(a, b)| a * b).collect();
    let sq: Vec<f64> = wave.du0.iter().map(|d| d * d).collect();
    let num = trapezoid(&prod, wave.dz)
        + model.df_dv(1.0, 0.0) * wave.du0[last] / wave.rate_plus
        + model.df_dv(-1.0, 0.0) * wave.du0[0] / wave.rate_minus;
    let den = trapezoid(&sq, wave.dz)
        + wave.du0[last].powi(2) / (2.0 * wave.rate_plus)
        + wave.du0[0].powi(2) / (2.0 * wave.rate_minus);
    -num / den
}

/// `c0` by adaptive quadrature in `u`, without the wave.
pub fn intrinsic_c0(model: &BistableModel) -> f64 {
    let num = integrate(|u| model.df_dv(u, 0.0), -1.0, 1.0, 1e-14);
    let den = integrate(|u| (2.0 * model.well_gap(u)).sqrt(), -1.0, 1.0, 1e-14);
    -num / den
}

// Dirichlet problem V'' + q V = g on a uniform grid, by the Thomas algorithm.
fn solve_dirichlet(q: &[f64], g: &[f64], h: f64, left: f64, right: f64) -> Result<Vec<f64>> {
    let n = q.len();
    let mut v = vec![0.0; n];
    v[0] = left;
    v[n - 1] = right;
    if n <= 2 {
        return Ok(v);
    }
    let inv = 1.0 / (h * h);
    let m = n - 2;
    let mut cp = vec![0.0; m];
    let mut dp = vec![0.0; m];
    for k in 0..m {
        let i = k + 1;
        let diag = -2.0 * inv + q[i];
        let mut rhs = g[i];
        if i == 1 {
            rhs -= inv * left;
        }
        if i == n - 2 {
            rhs -= inv * right;
        }
        let (denom, prev_d) = if k == 0 { (diag, 0.0) } else { (diag - inv * cp[k - 1], dp[k - 1]) };
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::IllConditioned { residual: f64::INFINITY });
        }
        cp[k] = inv / denom;
        dp[k] = (rhs - inv * prev_d) / denom;
    }
    v[m] = dp[m - 1];
    for k in (0..m - 1).rev() {
        v[k + 1] = dp[k] - cp[k] * v[k + 2];
    }
    let scale = g.iter().fold(1.0f64, |a, x| a.max(x.abs()));
    let residual = (1..n - 1)
        .map(|i| ((v[i - 1] - 2.0 * v[i] + v[i + 1]) * inv + q[i] * v[i] - g[i]).abs())
        .fold(0.0, f64::max)
        / scale;
    if !(residual <= SOLVE_TOL) {
        return Err(Error::IllConditioned { residual });
    }
    Ok(v)
}

/// Solves for `c0` and `V`. The two half-lines are solved separately with
/// `V(0) = 0` and the bounded asymptote at `+-Z`, which avoids the near-kernel
/// `U0'` of the full-line operator.
pub fn corrector(model: &BistableModel, wave: &StandingWave) -> Result<Corrector> {
    let n = wave.len();
    let half = n / 2;
    let last = n - 1;
    let c0 = wave_c0(model, wave);
    let g: Vec<f64> = wave
        .u0
        .iter()
        .zip(&wave.du0)
        .map(|(&u, &d)| -model.df_dv(u, 0.0) - c0 * d)
        .collect();
    let g_norm = g.iter().fold(0.0f64, |a, x| a.max(x.abs()));

    let prod: Vec<f64> = g.iter().zip(&wave.du0).map(|(a, b)| a * b).collect();
    let inner = trapezoid(&prod, wave.dz)
        + (-model.df_dv(1.0, 0.0) * wave.du0[last] - c0 * wave.du0[last].powi(2) / 2.0)
            / wave.rate_plus
        + (-model.df_dv(-1.0, 0.0) * wave.du0[0] - c0 * wave.du0[0].powi(2) / 2.0)
            / wave.rate_minus;
    let fredholm_residual = if g_norm > 0.0 { inner.abs() / g_norm } else { inner.abs() };
    if fredholm_residual > FREDHOLM_TOL {
        return Err(Error::FredholmViolation { residual: fredholm_residual });
    }

    let q: Vec<f64> = wave.u0.iter().map(|&u| model.df_tilde(u)).collect();
    let v_far_plus = -model.df_dv(1.0, 0.0) / model.df_tilde(1.0);
    let v_far_minus = -model.df_dv(-1.0, 0.0) / model.df_tilde(-1.0);
    let right = solve_dirichlet(&q[half..], &g[half..], wave.dz, 0.0, v_far_plus)?;
    let mut left_q = q[..=half].to_vec();
    let mut left_g = g[..=half].to_vec();
    left_q.reverse();
    left_g.reverse();
    let mut left = solve_dirichlet(&left_q, &left_g, wave.dz, 0.0, v_far_minus)?;
    left.reverse();
    let mut v = left;
    v.extend_from_slice(&right[1..]);

    let h = wave.dz;
    let mut dv = vec![0.0; n];
    for i in 1..last {
        dv[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    }
    dv[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    dv[last] = (3.0 * v[last] - 4.0 * v[last - 1] + v[last - 2]) / (2.0 * h);
    let d2v: Vec<f64> = (0..n).map(|i| g[i] - q[i] * v[i]).collect();

    let m_bound = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let deriv_rate = 0.5 * wave.lambda;
    let deriv_bound = (0..n)
        .map(|i| (dv[i].abs() + d2v[i].abs()) * (deriv_rate * wave.z[i].abs()).exp())
        .fold(0.0, f64::max);

    Ok(Corrector {
        c0,
        v,
        dv,
        d2v,
        m_bound,
        deriv_bound,
        deriv_rate,
        fredholm_residual,
        v_far_minus,
        v_far_plus,
    })
}

/// Standing wave and corrector together.
#[derive(Debug, Clone)]
pub struct ProfileTable {
    pub wave: StandingWave,
    pub corrector: Corrector,
}

impl ProfileTable {
    pub fn c0(&self) -> f64 {
        self.corrector.c0
    }

    pub fn v_at(&self, z: f64) -> f64 {
        let w = &self.wave;
        let c = &self.corrector;
        if z >= w.z_max {
            c.v_far_plus
        } else if z <= -w.z_max {
            c.v_far_minus
        } else {
            let s = (z + w.z_max) / w.dz;
            let k = (s.floor().max(0.0) as usize).min(w.len() - 2);
            hermite(s - k as f64, w.dz, c.v[k], c.dv[k], c.v[k + 1], c.dv[k + 1])
        }
    }

    /// CSV with `# key=value` header lines for `c0`, `lambda` and `Mbound`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# c0={:.17e}", self.corrector.c0)?;
        writeln!(out, "# lambda={:.17e}", self.wave.lambda)?;
        writeln!(out, "# Mbound={:.17e}", self.corrector.m_bound)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["z", "U0", "dU0", "d2U0", "V", "dV"])?;
        let wv = &self.wave;
        let c = &self.corrector;
        for i in 0..wv.len() {
            w.write_record(
                [wv.z[i], wv.u0[i], wv.du0[i], wv.d2u0[i], c.v[i], c.dv[i]]
                    .iter()
                    .map(|x| format!("{x:.17e}")),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Wave on the default table plus its corrector.
pub fn build_profile(model: &BistableModel, z_max: Option<f64>, n: usize) -> Result<ProfileTable> {
    let wave = super::wave::standing_wave(model, z_max, n)?;
    let corrector = corrector(model, &wave)?;
    Ok(ProfileTable { wave, corrector })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{analyze_nonlinearity, AnalysisOptions, PolynomialNonlinearity};
    use std::sync::Arc;

    fn model(coupling: f64) -> BistableModel {
        analyze_nonlinearity(
            Arc::new(PolynomialNonlinearity::cubic().with_coupling(coupling)),
            AnalysisOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn cubic_speed_constant() {
        let m = model(-1.0);
        let p = build_profile(&m, None, 4001).unwrap();
        let exact = 3.0 / std::f64::consts::SQRT_2;
        assert!((p.c0() - exact).abs() < 1e-8 * exact, "c0 {}", p.c0());
        assert!((intrinsic_c0(&m) - exact).abs() < 1e-12);
        assert!(p.corrector.fredholm_residual < 1e-12);
    }

    #[test]
    fn corrector_solves_equation() {
        let m = model(-1.0);
        let p = build_profile(&m, None, 4001).unwrap();
        let c = &p.corrector;
        let mid = p.wave.len() / 2;
        assert_eq!(c.v[mid], 0.0);
        assert!((c.v_far_plus + 0.5).abs() < 1e-15 && (c.v_far_minus + 0.5).abs() < 1e-15);
        // independent check with a 4th-order stencil on interior points
        let h = p.wave.dz;
        let v = &c.v;
        let mut worst: f64 = 0.0;
        for i in (mid - 1000..mid + 1000).filter(|&i| i.abs_diff(mid) > 2) {
            let d2 = (-v[i + 2] + 16.0 * v[i + 1] - 30.0 * v[i] + 16.0 * v[i - 1] - v[i - 2])
                / (12.0 * h * h);
            let u = p.wave.u0[i];
            let g = 1.0 - p.c0() * p.wave.du0[i];
            worst = worst.max((d2 + (1.0 - 3.0 * u * u) * v[i] - g).abs());
        }
        assert!(worst < 1e-4, "residual {worst}");
        assert!(c.m_bound >= 0.5 && c.m_bound < 1.0);
    }

    #[test]
    fn no_coupling_no_corrector() {
        let m = model(0.0);
        let p = build_profile(&m, None, 2001).unwrap();
        assert_eq!(p.c0(), 0.0);
        assert!(p.corrector.v.iter().all(|&v| v == 0.0));
        assert_eq!(intrinsic_c0(&m), 0.0);
    }

    #[test]
    fn csv_header() {
        let m = model(-1.0);
        let p = build_profile(&m, None, 2001).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# c0=2.12132"));
        assert!(lines[1].starts_with("# lambda="));
        assert!(lines[2].starts_with("# Mbound="));
        assert_eq!(lines[3], "z,U0,dU0,d2U0,V,dV");
        assert_eq!(lines.len(), 4 + 2001);
    }
}
