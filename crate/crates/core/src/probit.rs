//! Bayesian probit regression on the Finney (1947) vasoconstriction
//! data, sampled by the Albert-Chib data-augmentation Gibbs sweep.
//!
//! Each sweep consumes exactly 42 uniforms: three for the regression
//! coefficients, then one per latent variable in data order. Every
//! random draw goes through an inverse CDF, so a sweep is a fixed-length
//! deterministic map of its uniform block and the sampler can be driven
//! by any unit stream.

use std::path::Path;

use crate::error::{Error, Result};
use crate::normal::{clamp_unit, inv_norm_cdf, norm_cdf};
use crate::seq::DrivingSequence;

/// Observations in the vasoconstriction data.
pub const N_OBS: usize = 39;
/// Regression parameters: intercept, volume, rate.
pub const N_BETA: usize = 3;
/// Uniforms consumed per Gibbs sweep.
pub const GIBBS_M: usize = N_BETA + N_OBS;

/// The bundled Finney (1947) dataset.
pub const FINNEY_CSV: &str = include_str!("../data/finney.csv");

/// Floor for tail probabilities fed to the inverse CDF; keeps extreme
/// conditional means finite instead of -inf.
const TAIL_FLOOR: f64 = 1e-300;

/// Design matrix, responses, and the precomputed conditional-draw
/// matrices for the probit Gibbs sampler.
#[derive(Debug, Clone)]
pub struct ProbitData {
    /// rows (1, volume, rate)
    x: Vec<[f64; 3]>,
    y: Vec<u8>,
    xtx_inv: [[f64; 3]; 3],
    /// lower Cholesky factor of (XᵀX)⁻¹
    chol_l: [[f64; 3]; 3],
    /// column i of (XᵀX)⁻¹Xᵀ, so mean(Z) = Σ_i proj[i]·Z_i
    proj: Vec<[f64; 3]>,
}

impl ProbitData {
    pub fn from_rows(rows: &[(f64, f64, u8)]) -> Result<Self> {
        if rows.len() != N_OBS {
            return Err(Error::validation(format!(
                "expected {N_OBS} data rows, got {}",
                rows.len()
            )));
        }
        let anchors = rows
            .iter()
            .filter(|&&(v, r, y)| v == 1.9 && r == 0.95 && y == 1)
            .count();
        if anchors != 2 {
            return Err(Error::validation(format!(
                "expected the row (volume=1.9, rate=0.95, y=1) exactly twice, found it {anchors} times"
            )));
        }
        let mut x = Vec::with_capacity(N_OBS);
        let mut y = Vec::with_capacity(N_OBS);
        for &(volume, rate, resp) in rows {
            if resp > 1 {
                return Err(Error::validation(format!("non-binary response {resp}")));
            }
            x.push([1.0, volume, rate]);
            y.push(resp);
        }

        let mut xtx = [[0.0f64; 3]; 3];
        for xi in &x {
            for j in 0..3 {
                for k in 0..3 {
                    xtx[j][k] += xi[j] * xi[k];
                }
            }
        }
        let l_xtx = cholesky3(&xtx)?;
        let xtx_inv = invert_from_cholesky3(&l_xtx);
        let chol_l = cholesky3(&xtx_inv)?;
        let proj = x.iter().map(|xi| mat_vec3(&xtx_inv, xi)).collect();
        Ok(ProbitData {
            x,
            y,
            xtx_inv,
            chol_l,
            proj,
        })
    }

    /// Parse a CSV with header `volume,rate,y`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::validation("empty data file"))?;
        if header.trim() != "volume,rate,y" {
            return Err(Error::validation(format!(
                "expected header `volume,rate,y`, got `{header}`"
            )));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != 3 {
                return Err(Error::validation(format!(
                    "data row {}: expected 3 fields, got {}",
                    i + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str, what: &str| -> Result<f64> {
                s.trim()
                    .parse()
                    .map_err(|_| Error::validation(format!("data row {}: unparsable {what} `{s}`", i + 1)))
            };
            let volume = parse(fields[0], "volume")?;
            let rate = parse(fields[1], "rate")?;
            let y = parse(fields[2], "response")?;
            if y != 0.0 && y != 1.0 {
                return Err(Error::validation(format!(
                    "data row {}: non-binary response {y}",
                    i + 1
                )));
            }
            rows.push((volume, rate, y as u8));
        }
        ProbitData::from_rows(&rows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        ProbitData::from_csv(&text)
    }

    /// The bundled dataset.
    pub fn bundled() -> Result<Self> {
        ProbitData::from_csv(FINNEY_CSV)
    }

    pub fn design_row(&self, i: usize) -> &[f64; 3] {
        &self.x[i]
    }

    pub fn response(&self, i: usize) -> u8 {
        self.y[i]
    }

    pub fn xtx_inv(&self) -> &[[f64; 3]; 3] {
        &self.xtx_inv
    }

    pub fn chol_l(&self) -> &[[f64; 3]; 3] {
        &self.chol_l
    }
}

/// Lower Cholesky factor of a symmetric positive definite 3x3 matrix.
fn cholesky3(a: &[[f64; 3]; 3]) -> Result<[[f64; 3]; 3]> {
    let mut l = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::domain(
                        "matrix is not positive definite".to_string(),
                    ));
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Ok(l)
}

/// Inverse of A from its lower Cholesky factor: A⁻¹ = L⁻ᵀ L⁻¹.
fn invert_from_cholesky3(l: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    // forward-substitute columns of the identity to get L⁻¹
    let mut linv = [[0.0f64; 3]; 3];
    for c in 0..3 {
        for r in 0..3 {
            let mut s = if r == c { 1.0 } else { 0.0 };
            for k in 0..r {
                s -= l[r][k] * linv[k][c];
            }
            linv[r][c] = s / l[r][r];
        }
    }
    let mut inv = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                inv[i][j] += linv[k][i] * linv[k][j];
            }
        }
    }
    inv
}

fn mat_vec3(a: &[[f64; 3]; 3], v: &[f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i] += a[i][j] * v[j];
        }
    }
    out
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Inverse-CDF draw from a unit-variance normal with mean `mu`
/// truncated to [0, inf) when y = 1 and to (-inf, 0] when y = 0.
///
/// The textbook form mu + Φ⁻¹(Φ(-mu) + u·(1-Φ(-mu))) loses all
/// precision when Φ(-mu) rounds to 1; both branches below rewrite the
/// argument as a pure tail probability so the inverse CDF stays
/// accurate for any mu.
pub fn trunc_norm_inverse(mu: f64, y: u8, u: f64) -> Result<f64> {
    if !(0.0 < u && u < 1.0) {
        return Err(Error::domain(format!("uniform out of (0,1): {u}")));
    }
    if y > 1 {
        return Err(Error::domain(format!("non-binary truncation side {y}")));
    }
    if y == 1 {
        // q = (1-u)·Φ(mu) is the upper-tail mass beyond the draw
        let q = ((1.0 - u) * norm_cdf(mu)).max(TAIL_FLOOR);
        Ok((mu - inv_norm_cdf(q)?).max(0.0))
    } else {
        let p = (u * norm_cdf(-mu)).max(TAIL_FLOOR);
        Ok((mu + inv_norm_cdf(p)?).min(0.0))
    }
}

/// Draw β from its full conditional given Z:
/// β = (XᵀX)⁻¹XᵀZ + L·ε with ε_j = Φ⁻¹(u_j).
pub fn beta_update(z: &[f64], data: &ProbitData, u: &[f64; 3]) -> Result<[f64; 3]> {
    if z.len() != N_OBS {
        return Err(Error::domain(format!(
            "latent vector has {} entries, expected {N_OBS}",
            z.len()
        )));
    }
    let mut mean = [0.0f64; 3];
    for (proj, &zi) in data.proj.iter().zip(z) {
        for j in 0..3 {
            mean[j] += proj[j] * zi;
        }
    }
    let mut eps = [0.0f64; 3];
    for j in 0..3 {
        eps[j] = inv_norm_cdf(clamp_unit(u[j]))?;
    }
    let l = &data.chol_l;
    Ok([
        mean[0] + l[0][0] * eps[0],
        mean[1] + l[1][0] * eps[0] + l[1][1] * eps[1],
        mean[2] + l[2][0] * eps[0] + l[2][1] * eps[1] + l[2][2] * eps[2],
    ])
}

/// Sampler state: regression coefficients and latent normals.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbitState {
    pub beta: [f64; 3],
    pub z: Vec<f64>,
}

impl ProbitState {
    /// Deterministic sign-consistent start: β = 0 and each Z_i at the
    /// median of its truncated normal given β = 0.
    pub fn initial(data: &ProbitData) -> Result<Self> {
        let z = (0..N_OBS)
            .map(|i| trunc_norm_inverse(0.0, data.response(i), 0.5))
            .collect::<Result<Vec<f64>>>()?;
        Ok(ProbitState {
            beta: [0.0; 3],
            z,
        })
    }
}

/// One Gibbs sweep: β from u_1..u_3 given the current Z, then each Z_i
/// from one uniform in data order given the new β. Consumes exactly 42
/// uniforms and is deterministic in (state, u).
pub fn gibbs_step(state: &ProbitState, data: &ProbitData, u: &[f64]) -> Result<ProbitState> {
    if u.len() != GIBBS_M {
        return Err(Error::domain(format!(
            "sweep needs exactly {GIBBS_M} uniforms, got {}",
            u.len()
        )));
    }
    let beta = beta_update(&state.z, data, &[u[0], u[1], u[2]])?;
    let mut z = Vec::with_capacity(N_OBS);
    for i in 0..N_OBS {
        let mu = dot3(data.design_row(i), &beta);
        z.push(trunc_norm_inverse(
            mu,
            data.response(i),
            clamp_unit(u[N_BETA + i]),
        )?);
    }
    Ok(ProbitState { beta, z })
}

/// Labels for the 42 tracked parameters, in report order.
pub fn param_labels() -> Vec<String> {
    let mut labels = vec!["beta0".into(), "beta1".into(), "beta2".into()];
    labels.extend((1..=N_OBS).map(|i| format!("z{i}")));
    labels
}

/// Flatten a state into the 42-parameter report order.
pub fn param_vector(state: &ProbitState) -> Vec<f64> {
    let mut v = Vec::with_capacity(GIBBS_M);
    v.extend_from_slice(&state.beta);
    v.extend_from_slice(&state.z);
    v
}

/// Per-parameter posterior means over a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorEstimate {
    /// means in param_labels order: beta0..beta2, z1..z39
    pub params: Vec<f64>,
    pub steps_used: usize,
}

/// Run floor(len/42) sweeps from the deterministic start and average the
/// post-burn states; no states are stored.
pub fn run_posterior_means(
    data: &ProbitData,
    driving: &DrivingSequence,
    burn: usize,
) -> Result<PosteriorEstimate> {
    let vals = driving.values();
    let steps = vals.len() / GIBBS_M;
    if steps <= burn {
        return Err(Error::domain(format!(
            "chain of {steps} steps does not cover burn-in {burn}"
        )));
    }
    let mut state = ProbitState::initial(data)?;
    let mut sums = vec![0.0f64; GIBBS_M];
    for step in 0..steps {
        state = gibbs_step(&state, data, &vals[step * GIBBS_M..(step + 1) * GIBBS_M])?;
        if step >= burn {
            for (s, v) in sums.iter_mut().zip(param_vector(&state)) {
                *s += v;
            }
        }
    }
    let used = steps - burn;
    for s in &mut sums {
        *s /= used as f64;
    }
    Ok(PosteriorEstimate {
        params: sums,
        steps_used: used,
    })
}

/// Componentwise means of a stored trajectory over steps burn+1..n.
pub fn posterior_means(trajectory: &[ProbitState], burn: usize) -> Result<PosteriorEstimate> {
    if trajectory.len() <= burn {
        return Err(Error::domain(format!(
            "trajectory of {} states does not cover burn-in {burn}",
            trajectory.len()
        )));
    }
    let tail = &trajectory[burn..];
    let mut sums = vec![0.0f64; GIBBS_M];
    for state in tail {
        for (s, v) in sums.iter_mut().zip(param_vector(state)) {
            *s += v;
        }
    }
    for s in &mut sums {
        *s /= tail.len() as f64;
    }
    Ok(PosteriorEstimate {
        params: sums,
        steps_used: tail.len(),
    })
}
