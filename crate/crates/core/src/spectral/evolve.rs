use super::{norm_h, FrequencyOperator};
use crate::error::{Error, Result};
use num_complex::Complex64 as C64;

#[derive(Clone, Debug, Default)]
pub struct NormSeries {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
}

/// Classical RK4 for ẇ = L_ω w, recording the h-weighted ℓ² norm every
/// `sample_every` time units. `dt` is an upper bound: the step is reduced
/// to 2/‖L‖_∞ (inside the RK4 stability region) and to divide the sampling
/// interval evenly.
pub fn evolve_frequency_lde(op: &FrequencyOperator, w0: &[C64], t_end: f64, dt: f64, sample_every: f64) -> Result<NormSeries> {
    if !(dt > 0.0 && t_end >= 0.0 && sample_every > 0.0) {
        return Err(Error::Config(format!("bad time stepping: dt={dt}, T={t_end}, sample={sample_every}")));
    }
    let n = w0.len();
    let dt = dt.min(2.0 / row_norm(op)).min(sample_every);
    let every = (sample_every / dt).ceil() as usize;
    let dt = sample_every / every as f64;
    let steps = (t_end / dt).round() as usize;
    let mut w = w0.to_vec();
    let mut out = NormSeries::default();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![C64::default(); n], vec![C64::default(); n], vec![C64::default(); n], vec![C64::default(); n]);
    let mut tmp = vec![C64::default(); n];
    let half = C64::new(0.5 * dt, 0.0);
    for step in 0..=steps {
        if step % every == 0 {
            let nv = norm_h(&w, op.h);
            if !nv.is_finite() {
                return Err(Error::BlowUp { n: 0, l: 0, t: step as f64 * dt });
            }
            out.times.push(step as f64 * dt);
            out.norms.push(nv);
        }
        if step == steps {
            break;
        }
        op.matrix.matvec(&w, &mut k1);
        for i in 0..n {
            tmp[i] = w[i] + half * k1[i];
        }
        op.matrix.matvec(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = w[i] + half * k2[i];
        }
        op.matrix.matvec(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = w[i] + k3[i] * dt;
        }
        op.matrix.matvec(&tmp, &mut k4);
        for i in 0..n {
            w[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0);
        }
    }
    Ok(out)
}

fn row_norm(op: &FrequencyOperator) -> f64 {
    let n = op.matrix.n;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(op.matrix.kl);
            let hi = (i + op.matrix.ku).min(n - 1);
            (lo..=hi).map(|j| op.matrix.get(i, j).norm()).sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// All eigenvalues of the discretized operator (dense complex Schur).
pub fn dense_eigenvalues(op: &FrequencyOperator) -> Result<Vec<C64>> {
    let m = op.matrix.to_dense();
    let eig = m.schur().eigenvalues().ok_or(Error::Singular("dense Schur"))?;
    Ok(eig.iter().copied().collect())
}

pub fn least_stable(eigs: &[C64]) -> C64 {
    eigs.iter().copied().fold(C64::new(f64::NEG_INFINITY, 0.0), |a, b| if b.re > a.re { b } else { a })
}

/// Re λ minus the largest real part among the other eigenvalues (the one
/// closest to λ is taken to be λ itself).
pub fn spectral_gap(eigs: &[C64], lambda: C64) -> f64 {
    let me = eigs
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - lambda).norm().total_cmp(&(b.1 - lambda).norm()))
        .map(|p| p.0);
    let next = eigs
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != me)
        .map(|(_, z)| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    lambda.re - next
}
