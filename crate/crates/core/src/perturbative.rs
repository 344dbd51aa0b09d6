//! Desk-scale perturbative kinetic setting: a linearized BGK solver whose
//! collision operator has the kernel/projection structure of the linearized
//! Boltzmann operator, the acoustic system it relaxes to, moment extraction,
//! the kernel-valued limit profile, and the sup-in-time convergence
//! diagnostic.
//!
//! The distribution is f = M + delta sqrt(M) h with the global Maxwellian M
//! (rho = 1, u = 0, T = 1, one velocity dimension). The collision operator is
//! L = pi_L - I, the simplest member of the analyzed class: it shares the
//! kernel Span{sqrt(M), v sqrt(M), (v^2-1) sqrt(M)}, the orthogonal
//! projection pi_L, dissipativity, and the acoustic limit.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::randomspace::{eval_affine_field, AffineField, ParameterVector, SpatialGrid};
use crate::Snapshot;

/// Time scaling of the kinetic equation
/// d_t h + eps^-alpha v d_x h = eps^-(1+alpha) L(h).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scaling {
    /// alpha = 0.
    Acoustic,
    /// alpha = 1 (incompressible Navier-Stokes scaling).
    Ins,
}

impl Scaling {
    pub fn from_alpha(alpha: u32) -> Result<Self> {
        match alpha {
            0 => Ok(Self::Acoustic),
            1 => Ok(Self::Ins),
            other => Err(Error::InvalidArgument(format!(
                "alpha must be 0 or 1, got {other}"
            ))),
        }
    }

    pub fn alpha(&self) -> i32 {
        match self {
            Self::Acoustic => 0,
            Self::Ins => 1,
        }
    }
}

/// Uniform velocity grid on [-v_max, v_max] with trapezoid weights and
/// precomputed Maxwellian values. Trapezoid quadrature is spectrally accurate
/// for the Gaussian-decaying integrands here; v_max >= 6 keeps the discrete
/// mass of M within 1e-8 of 1.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGridR {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub maxwellian: Vec<f64>,
    pub sqrt_m: Vec<f64>,
}

impl VelocityGridR {
    pub fn new(n_w: usize, v_max: f64) -> Result<Self> {
        if n_w < 2 {
            return Err(Error::InvalidArgument("n_w must be >= 2".into()));
        }
        if v_max <= 0.0 {
            return Err(Error::InvalidArgument("v_max must be > 0".into()));
        }
        let h = 2.0 * v_max / (n_w - 1) as f64;
        let nodes: Vec<f64> = (0..n_w).map(|k| -v_max + k as f64 * h).collect();
        let weights: Vec<f64> = (0..n_w)
            .map(|k| if k == 0 || k == n_w - 1 { 0.5 * h } else { h })
            .collect();
        let maxwellian: Vec<f64> = nodes
            .iter()
            .map(|&v| (-0.5 * v * v).exp() / (2.0 * PI).sqrt())
            .collect();
        let sqrt_m = maxwellian.iter().map(|m| m.sqrt()).collect();
        Ok(Self {
            nodes,
            weights,
            maxwellian,
            sqrt_m,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn v_max(&self) -> f64 {
        self.nodes.last().copied().unwrap_or(0.0)
    }

    /// Discrete integral over velocity: sum_k w_k a_k.
    pub fn integrate(&self, a: &[f64]) -> f64 {
        self.weights.iter().zip(a).map(|(w, x)| w * x).sum()
    }

    /// Discrete L2_v inner product.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }
}

/// Orthonormal basis of Ker(L): numerical Gram-Schmidt on
/// {sqrt(M), v sqrt(M), (v^2 - 1) sqrt(M)} under the discrete quadrature, so
/// discrete orthonormality holds regardless of the grid truncation.
#[derive(Debug, Clone)]
pub struct KernelBasis {
    pub phi: [Vec<f64>; 3],
}

impl KernelBasis {
    pub fn new(vgrid: &VelocityGridR) -> Self {
        let raw: [Vec<f64>; 3] = [
            vgrid.sqrt_m.clone(),
            vgrid
                .nodes
                .iter()
                .zip(&vgrid.sqrt_m)
                .map(|(v, s)| v * s)
                .collect(),
            vgrid
                .nodes
                .iter()
                .zip(&vgrid.sqrt_m)
                .map(|(v, s)| (v * v - 1.0) * s)
                .collect(),
        ];
        let mut phi: Vec<Vec<f64>> = Vec::with_capacity(3);
        for mut candidate in raw {
            for prev in &phi {
                let proj = vgrid.inner(&candidate, prev);
                for (c, p) in candidate.iter_mut().zip(prev) {
                    *c -= proj * p;
                }
            }
            let norm = vgrid.inner(&candidate, &candidate).sqrt();
            for c in candidate.iter_mut() {
                *c /= norm;
            }
            phi.push(candidate);
        }
        Self {
            phi: [phi[0].clone(), phi[1].clone(), phi[2].clone()],
        }
    }
}

/// Orthogonal projection onto Ker(L), applied per spatial node:
/// pi_L(h) = sum_i <h, phi_i>_v phi_i.
pub fn pi_l(h: &[f64], basis: &KernelBasis, vgrid: &VelocityGridR) -> Result<Vec<f64>> {
    let n_w = vgrid.len();
    if !h.len().is_multiple_of(n_w) {
        return Err(Error::InvalidArgument(format!(
            "{} values do not tile velocity grid of size {n_w}",
            h.len()
        )));
    }
    let mut out = vec![0.0; h.len()];
    for (row, out_row) in h.chunks(n_w).zip(out.chunks_mut(n_w)) {
        for phi in &basis.phi {
            let coeff = vgrid.inner(row, phi);
            for (o, p) in out_row.iter_mut().zip(phi) {
                *o += coeff * p;
            }
        }
    }
    Ok(out)
}

/// Perturbation field h(x, v) with its scaling parameters.
#[derive(Debug, Clone)]
pub struct PerturbativeState {
    /// Row-major over (x, v).
    pub h: Vec<f64>,
    pub eps: f64,
    pub scaling: Scaling,
    pub delta: f64,
    pub t: f64,
}

impl PerturbativeState {
    pub fn new(h: Vec<f64>, eps: f64, scaling: Scaling, delta: f64) -> Result<Self> {
        if eps <= 0.0 || delta <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "eps = {eps} and delta = {delta} must be > 0"
            )));
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "h contains non-finite values".into(),
            ));
        }
        Ok(Self {
            h,
            eps,
            scaling,
            delta,
            t: 0.0,
        })
    }

    /// Discrete L2_{x,v} norm with dx and the velocity weights.
    pub fn norm(&self, grid: &SpatialGrid, vgrid: &VelocityGridR) -> f64 {
        let n_w = vgrid.len();
        (self
            .h
            .chunks(n_w)
            .map(|row| vgrid.inner(row, row))
            .sum::<f64>()
            * grid.dx)
            .sqrt()
    }

    /// Discrete mass functional int int sqrt(M) h dv dx; transport telescopes
    /// and the collision preserves the kernel component, so this is conserved.
    pub fn mass(&self, grid: &SpatialGrid, vgrid: &VelocityGridR) -> f64 {
        let n_w = vgrid.len();
        self.h
            .chunks(n_w)
            .map(|row| vgrid.inner(row, &vgrid.sqrt_m))
            .sum::<f64>()
            * grid.dx
    }
}

/// One IMEX step: explicit upwind transport at speed v / eps^alpha, then the
/// closed-form implicit collision of L = pi_L - I (the kernel component
/// passes through, the orthogonal one is divided by 1 + dt / eps^(1+alpha)).
pub fn bgk_step(
    state: &PerturbativeState,
    dt: f64,
    grid: &SpatialGrid,
    vgrid: &VelocityGridR,
    basis: &KernelBasis,
) -> Result<PerturbativeState> {
    let n_x = grid.n_x;
    let n_w = vgrid.len();
    if state.h.len() != n_x * n_w {
        return Err(Error::InvalidArgument("state does not match grids".into()));
    }
    let alpha = state.scaling.alpha();
    let speed_scale = state.eps.powi(alpha);
    let dt_max = grid.dx * speed_scale / vgrid.v_max();
    if dt > dt_max * (1.0 + 1e-9) {
        return Err(Error::StepSize(format!(
            "dt = {dt} exceeds the transport limit {dt_max}"
        )));
    }

    let mut h_star = vec![0.0; n_x * n_w];
    for i in 0..n_x {
        let left = (i + n_x - 1) % n_x;
        let right = (i + 1) % n_x;
        for (m, &v) in vgrid.nodes.iter().enumerate() {
            let speed = v / speed_scale;
            let dh = if speed > 0.0 {
                (state.h[i * n_w + m] - state.h[left * n_w + m]) / grid.dx
            } else if speed < 0.0 {
                (state.h[right * n_w + m] - state.h[i * n_w + m]) / grid.dx
            } else {
                0.0
            };
            h_star[i * n_w + m] = state.h[i * n_w + m] - dt * speed * dh;
        }
    }

    let kernel = pi_l(&h_star, basis, vgrid)?;
    let relax = 1.0 + dt / state.eps.powi(1 + alpha);
    let h_new: Vec<f64> = h_star
        .iter()
        .zip(&kernel)
        .map(|(hs, hk)| hk + (hs - hk) / relax)
        .collect();

    Ok(PerturbativeState {
        h: h_new,
        eps: state.eps,
        scaling: state.scaling,
        delta: state.delta,
        t: state.t + dt,
    })
}

/// Steady-state moments (rho, momentum, E) of the global Maxwellian for a
/// given velocity dimension: E = rho |u|^2 / 2 + d_v rho T / 2 at (1, 0, 1).
/// d_v = 3 gives the textbook (1, 0, 3/2); this solver runs d_v = 1.
pub fn steady_state(d_v: usize) -> [f64; 3] {
    [1.0, 0.0, d_v as f64 / 2.0]
}

/// Macroscopic moments per cell.
#[derive(Debug, Clone)]
pub struct MomentVector {
    pub rho: Vec<f64>,
    pub momentum: Vec<f64>,
    pub energy: Vec<f64>,
}

/// Moments of the high-fidelity solution:
/// u_H(x) = u_st + delta int (1, v, v^2/2)^T sqrt(M) h(x, v) dv.
pub fn moments_from_h(
    state: &PerturbativeState,
    grid: &SpatialGrid,
    vgrid: &VelocityGridR,
) -> Result<MomentVector> {
    let n_x = grid.n_x;
    let n_w = vgrid.len();
    if state.h.len() != n_x * n_w {
        return Err(Error::InvalidArgument("state does not match grids".into()));
    }
    let u_st = steady_state(1);
    let mut rho = vec![0.0; n_x];
    let mut momentum = vec![0.0; n_x];
    let mut energy = vec![0.0; n_x];
    for i in 0..n_x {
        let row = &state.h[i * n_w..(i + 1) * n_w];
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (k, &h) in row.iter().enumerate() {
            let weighted = vgrid.weights[k] * vgrid.sqrt_m[k] * h;
            m0 += weighted;
            m1 += weighted * vgrid.nodes[k];
            m2 += weighted * 0.5 * vgrid.nodes[k] * vgrid.nodes[k];
        }
        rho[i] = u_st[0] + state.delta * m0;
        momentum[i] = u_st[1] + state.delta * m1;
        energy[i] = u_st[2] + state.delta * m2;
    }
    Ok(MomentVector {
        rho,
        momentum,
        energy,
    })
}

/// Linearized Euler (acoustic) state: perturbations of density, velocity and
/// temperature around (1, 0, 1).
#[derive(Debug, Clone)]
pub struct AcousticState {
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub temp: Vec<f64>,
    pub d_v: usize,
    pub t: f64,
}

/// Sound speed of the acoustic system: sqrt(1 + 2/d_v).
pub fn sound_speed(d_v: usize) -> f64 {
    (1.0 + 2.0 / d_v as f64).sqrt()
}

/// One first-order upwind step on the characteristic decomposition of
/// d_t rho + d_x u = 0, d_t u + d_x(rho + T) = 0, (d_v/2) d_t T + d_x u = 0.
///
/// Characteristic variables: w_pm = rho +- c u + T advect at speeds +-c with
/// c = sqrt(1 + 2/d_v); w_0 = rho - (d_v/2) T is stationary.
pub fn acoustic_step(state: &AcousticState, dt: f64, grid: &SpatialGrid) -> Result<AcousticState> {
    let n_x = grid.n_x;
    if state.rho.len() != n_x || state.u.len() != n_x || state.temp.len() != n_x {
        return Err(Error::InvalidArgument("state does not match grid".into()));
    }
    let c = sound_speed(state.d_v);
    let dt_max = grid.dx / c;
    if dt > dt_max * (1.0 + 1e-9) {
        return Err(Error::StepSize(format!(
            "dt = {dt} exceeds the acoustic limit {dt_max}"
        )));
    }
    let half_dv = state.d_v as f64 / 2.0;
    let mut w_plus = vec![0.0; n_x];
    let mut w_minus = vec![0.0; n_x];
    let mut w_zero = vec![0.0; n_x];
    for i in 0..n_x {
        w_plus[i] = state.rho[i] + c * state.u[i] + state.temp[i];
        w_minus[i] = state.rho[i] - c * state.u[i] + state.temp[i];
        w_zero[i] = state.rho[i] - half_dv * state.temp[i];
    }
    let courant = c * dt / grid.dx;
    let mut rho = vec![0.0; n_x];
    let mut u = vec![0.0; n_x];
    let mut temp = vec![0.0; n_x];
    for i in 0..n_x {
        let left = (i + n_x - 1) % n_x;
        let right = (i + 1) % n_x;
        let wp = w_plus[i] - courant * (w_plus[i] - w_plus[left]);
        let wm = w_minus[i] + courant * (w_minus[right] - w_minus[i]);
        let w0 = w_zero[i];
        // invert (w+, w-, w0) -> (rho, u, T)
        let s = 0.5 * (wp + wm); // rho + T
        let rho_i = (w0 + half_dv * s) / (1.0 + half_dv);
        rho[i] = rho_i;
        temp[i] = s - rho_i;
        u[i] = (wp - wm) / (2.0 * c);
    }
    Ok(AcousticState {
        rho,
        u,
        temp,
        d_v: state.d_v,
        t: state.t + dt,
    })
}

/// Kernel-valued limit profile of the perturbation:
/// h(x, v) = [rho + v u + (v^2 - d_v) T / 2] sqrt(M), d_v = 1 here.
///
/// The sqrt(M) weight makes the moments of the result reproduce the given
/// (rho, u, T)-perturbations through [`moments_from_h`].
pub fn limit_profile(
    rho: &[f64],
    u: &[f64],
    temp: &[f64],
    vgrid: &VelocityGridR,
) -> Result<Vec<f64>> {
    let n_x = rho.len();
    if u.len() != n_x || temp.len() != n_x {
        return Err(Error::InvalidArgument(
            "moment fields differ in length".into(),
        ));
    }
    let n_w = vgrid.len();
    let mut h = vec![0.0; n_x * n_w];
    for i in 0..n_x {
        for (k, (&v, &s)) in vgrid.nodes.iter().zip(&vgrid.sqrt_m).enumerate() {
            h[i * n_w + k] = (rho[i] + v * u[i] + 0.5 * (v * v - 1.0) * temp[i]) * s;
        }
    }
    Ok(h)
}

/// Sup over stored times of the discrete L^inf_x L^2_v distance between a
/// kinetic trajectory and its limit trajectory.
pub fn vt_diagnostic(
    h_traj: &[(f64, Vec<f64>)],
    h_limit_traj: &[(f64, Vec<f64>)],
    vgrid: &VelocityGridR,
) -> Result<f64> {
    if h_traj.len() != h_limit_traj.len() {
        return Err(Error::InvalidArgument(format!(
            "trajectories store {} vs {} times",
            h_traj.len(),
            h_limit_traj.len()
        )));
    }
    let n_w = vgrid.len();
    let mut sup = 0.0f64;
    for ((t_a, h_a), (t_b, h_b)) in h_traj.iter().zip(h_limit_traj) {
        if (t_a - t_b).abs() > 1e-12 * t_a.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "mismatched schedules: {t_a} vs {t_b}"
            )));
        }
        if h_a.len() != h_b.len() || h_a.len() % n_w != 0 {
            return Err(Error::InvalidArgument("field shapes differ".into()));
        }
        for (row_a, row_b) in h_a.chunks(n_w).zip(h_b.chunks(n_w)) {
            let diff: Vec<f64> = row_a.iter().zip(row_b).map(|(a, b)| a - b).collect();
            sup = sup.max(vgrid.inner(&diff, &diff).sqrt());
        }
    }
    Ok(sup)
}

/// Problem description shared by the kinetic solver and its acoustic
/// low-fidelity partner. Randomness enters through the affine initial
/// density perturbation; velocity and temperature start at zero.
#[derive(Debug, Clone)]
pub struct PerturbativeProblem {
    pub scaling: Scaling,
    pub eps: f64,
    pub delta: f64,
    pub grid: SpatialGrid,
    pub vgrid: VelocityGridR,
    pub t_final: f64,
    pub c_cfl: f64,
    /// Initial density perturbation rho~(x, z), affine in z.
    pub rho0: AffineField,
}

impl PerturbativeProblem {
    pub fn kinetic_dt(&self) -> f64 {
        self.c_cfl * self.grid.dx * self.eps.powi(self.scaling.alpha()) / self.vgrid.v_max()
    }

    fn initial_fields(&self, z: &ParameterVector) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let rho0 = eval_affine_field(&self.rho0, z, &self.grid)?;
        let zero = vec![0.0; self.grid.n_x];
        Ok((rho0, zero.clone(), zero))
    }

    /// Run the kinetic model and return the final perturbation state.
    pub fn bgk_solve(&self, z: &ParameterVector) -> Result<PerturbativeState> {
        let basis = KernelBasis::new(&self.vgrid);
        let (rho0, u0, temp0) = self.initial_fields(z)?;
        let h0 = limit_profile(&rho0, &u0, &temp0, &self.vgrid)?;
        let mut state = PerturbativeState::new(h0, self.eps, self.scaling, self.delta)?;
        let dt0 = self.kinetic_dt();
        while state.t < self.t_final {
            let dt = dt0.min(self.t_final - state.t);
            if dt <= self.t_final * 1e-15 {
                break;
            }
            state = bgk_step(&state, dt, &self.grid, &self.vgrid, &basis)?;
        }
        Ok(state)
    }

    /// Run the acoustic model and return the final perturbation state.
    pub fn acoustic_solve(&self, z: &ParameterVector) -> Result<AcousticState> {
        let (rho0, u0, temp0) = self.initial_fields(z)?;
        let mut state = AcousticState {
            rho: rho0,
            u: u0,
            temp: temp0,
            d_v: 1,
            t: 0.0,
        };
        let dt0 = self.c_cfl * self.grid.dx / sound_speed(1);
        while state.t < self.t_final {
            let dt = dt0.min(self.t_final - state.t);
            if dt <= self.t_final * 1e-15 {
                break;
            }
            state = acoustic_step(&state, dt, &self.grid)?;
        }
        Ok(state)
    }

    /// Kinetic moments (rho, m, E) at T as a snapshot: nv = 3 moment fields
    /// interleaved per cell, dx quadrature weights.
    pub fn bgk_solve_moments(&self, z: &ParameterVector) -> Result<Snapshot> {
        let state = self.bgk_solve(z)?;
        let moments = moments_from_h(&state, &self.grid, &self.vgrid)?;
        self.moments_snapshot(
            "bgk-moments",
            &moments.rho,
            &moments.momentum,
            &moments.energy,
            z,
        )
    }

    /// Acoustic moments at T, mapped back to (rho, rho u, E) with
    /// rho = 1 + delta rho~, u = delta u~, T = 1 + delta T~ and
    /// E = rho u^2 / 2 + d_v rho T / 2.
    pub fn acoustic_solve_moments(&self, z: &ParameterVector) -> Result<Snapshot> {
        let state = self.acoustic_solve(z)?;
        let delta = self.delta;
        let n_x = self.grid.n_x;
        let mut rho = vec![0.0; n_x];
        let mut momentum = vec![0.0; n_x];
        let mut energy = vec![0.0; n_x];
        for i in 0..n_x {
            let rho_full = 1.0 + delta * state.rho[i];
            let u_full = delta * state.u[i];
            let temp_full = 1.0 + delta * state.temp[i];
            rho[i] = rho_full;
            momentum[i] = rho_full * u_full;
            energy[i] =
                0.5 * rho_full * u_full * u_full + state.d_v as f64 / 2.0 * rho_full * temp_full;
        }
        self.moments_snapshot("acoustic-moments", &rho, &momentum, &energy, z)
    }

    fn moments_snapshot(
        &self,
        model: &str,
        rho: &[f64],
        momentum: &[f64],
        energy: &[f64],
        z: &ParameterVector,
    ) -> Result<Snapshot> {
        let n_x = self.grid.n_x;
        let mut values = Vec::with_capacity(3 * n_x);
        for i in 0..n_x {
            values.push(rho[i]);
            values.push(momentum[i]);
            values.push(energy[i]);
        }
        Snapshot::new(
            model,
            n_x,
            3,
            z.clone(),
            vec![self.grid.dx; 3 * n_x],
            values,
        )
    }

    /// Kinetic trajectory and its acoustic limit trajectory on one shared
    /// store schedule (`n_stores` + 1 fields including t = 0), for the V_T
    /// diagnostic. Both models advance with the kinetic step size.
    #[allow(clippy::type_complexity)]
    pub fn paired_trajectories(
        &self,
        z: &ParameterVector,
        n_stores: usize,
    ) -> Result<(Vec<(f64, Vec<f64>)>, Vec<(f64, Vec<f64>)>)> {
        if n_stores == 0 {
            return Err(Error::InvalidArgument("n_stores must be >= 1".into()));
        }
        let basis = KernelBasis::new(&self.vgrid);
        let (rho0, u0, temp0) = self.initial_fields(z)?;
        let h0 = limit_profile(&rho0, &u0, &temp0, &self.vgrid)?;
        let mut kinetic = PerturbativeState::new(h0.clone(), self.eps, self.scaling, self.delta)?;
        let mut acoustic = AcousticState {
            rho: rho0,
            u: u0,
            temp: temp0,
            d_v: 1,
            t: 0.0,
        };
        let dt0 = self.kinetic_dt();
        let total_steps = (self.t_final / dt0).ceil().max(1.0) as usize;
        let dt = self.t_final / total_steps as f64;
        let stride = (total_steps / n_stores).max(1);

        let mut h_traj = vec![(0.0, h0.clone())];
        let mut limit_traj = vec![(0.0, h0)];
        for step in 1..=total_steps {
            kinetic = bgk_step(&kinetic, dt, &self.grid, &self.vgrid, &basis)?;
            acoustic = acoustic_step(&acoustic, dt, &self.grid)?;
            if step % stride == 0 || step == total_steps {
                let h_lim = limit_profile(&acoustic.rho, &acoustic.u, &acoustic.temp, &self.vgrid)?;
                h_traj.push((kinetic.t, kinetic.h.clone()));
                limit_traj.push((acoustic.t, h_lim));
            }
        }
        Ok((h_traj, limit_traj))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vgrid64() -> VelocityGridR {
        VelocityGridR::new(64, 6.0).unwrap()
    }

    fn problem(eps: f64, delta: f64, t_final: f64) -> PerturbativeProblem {
        let grid = SpatialGrid::new(32).unwrap();
        let rho0 = AffineField::new(
            grid.centers()
                .iter()
                .map(|&x| (2.0 * PI * x).cos())
                .collect(),
            vec![],
            None,
        )
        .unwrap();
        PerturbativeProblem {
            scaling: Scaling::Acoustic,
            eps,
            delta,
            grid,
            vgrid: vgrid64(),
            t_final,
            c_cfl: 0.4,
            rho0,
        }
    }

    #[test]
    fn maxwellian_mass_and_symmetry() {
        let vgrid = vgrid64();
        let mass = vgrid.integrate(&vgrid.maxwellian);
        assert!((mass - 1.0).abs() < 1e-8, "discrete Maxwellian mass {mass}");
        for (a, b) in vgrid.nodes.iter().zip(vgrid.nodes.iter().rev()) {
            assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_basis_is_orthonormal() {
        let vgrid = vgrid64();
        let basis = KernelBasis::new(&vgrid);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                let got = vgrid.inner(&basis.phi[i], &basis.phi[j]);
                assert!((got - expect).abs() < 1e-10, "<phi_{i}, phi_{j}> = {got}");
            }
        }
    }

    #[test]
    fn projection_fixes_basis_elements() {
        let vgrid = vgrid64();
        let basis = KernelBasis::new(&vgrid);
        let out = pi_l(&basis.phi[1], &basis, &vgrid).unwrap();
        for (a, b) in out.iter().zip(&basis.phi[1]) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn projection_annihilates_orthogonal_profile() {
        // v^3-like profile, explicitly orthogonalized against the kernel
        let vgrid = vgrid64();
        let basis = KernelBasis::new(&vgrid);
        let mut odd: Vec<f64> = vgrid
            .nodes
            .iter()
            .zip(&vgrid.sqrt_m)
            .map(|(v, s)| v * v * v * s)
            .collect();
        for phi in &basis.phi {
            let proj = vgrid.inner(&odd, phi);
            for (o, p) in odd.iter_mut().zip(phi) {
                *o -= proj * p;
            }
        }
        let out = pi_l(&odd, &basis, &vgrid).unwrap();
        let norm = vgrid.inner(&out, &out).sqrt();
        assert!(norm < 1e-10, "projection of orthogonal profile {norm}");
    }

    #[test]
    fn kernel_valued_constant_state_is_stationary() {
        let vgrid = vgrid64();
        let basis = KernelBasis::new(&vgrid);
        let grid = SpatialGrid::new(8).unwrap();
        let n_w = vgrid.len();
        let mut h = vec![0.0; 8 * n_w];
        for i in 0..8 {
            for k in 0..n_w {
                h[i * n_w + k] = 0.3 * basis.phi[0][k] - 0.1 * basis.phi[2][k];
            }
        }
        let state = PerturbativeState::new(h.clone(), 1.0, Scaling::Ins, 1e-3).unwrap();
        let next = bgk_step(&state, 1e-3, &grid, &vgrid, &basis).unwrap();
        for (a, b) in next.h.iter().zip(&h) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_component_contracts_in_closed_form() {
        // spatially constant, h orthogonal to the kernel, eps = alpha = 1:
        // each step divides the norm by (1 + dt)
        let vgrid = vgrid64();
        let basis = KernelBasis::new(&vgrid);
        let grid = SpatialGrid::new(4).unwrap();
        let n_w = vgrid.len();
        let mut profile: Vec<f64> = vgrid
            .nodes
            .iter()
            .zip(&vgrid.sqrt_m)
            .map(|(v, s)| v * v * v * s)
            .collect();
        for phi in &basis.phi {
            let proj = vgrid.inner(&profile, phi);
            for (o, p) in profile.iter_mut().zip(phi) {
                *o -= proj * p;
            }
        }
        let mut h = vec![0.0; 4 * n_w];
        for i in 0..4 {
            h[i * n_w..(i + 1) * n_w].copy_from_slice(&profile);
        }
        let state = PerturbativeState::new(h, 1.0, Scaling::Ins, 1e-3).unwrap();
        let dt = 0.4 * grid.dx / vgrid.v_max();
        let next = bgk_step(&state, dt, &grid, &vgrid, &basis).unwrap();
        let before = state.norm(&grid, &vgrid);
        let after = next.norm(&grid, &vgrid);
        assert!(
            (after - before / (1.0 + dt)).abs() < 1e-12 * before,
            "contraction {} vs 1/(1+dt) = {}",
            after / before,
            1.0 / (1.0 + dt)
        );
    }

    #[test]
    fn norm_nonincreasing_in_acoustic_scaling() {
        let p = problem(1e-3, 1e-3, 1.0);
        let basis = KernelBasis::new(&p.vgrid);
        let z = ParameterVector(vec![]);
        let rho0 = eval_affine_field(&p.rho0, &z, &p.grid).unwrap();
        let zero = vec![0.0; p.grid.n_x];
        let h0 = limit_profile(&rho0, &zero, &zero, &p.vgrid).unwrap();
        let mut state = PerturbativeState::new(h0, p.eps, p.scaling, p.delta).unwrap();
        let dt = p.kinetic_dt();
        let mut prev = state.norm(&p.grid, &p.vgrid);
        let mass0 = state.mass(&p.grid, &p.vgrid);
        for _ in 0..100 {
            state = bgk_step(&state, dt, &p.grid, &p.vgrid, &basis).unwrap();
            let norm = state.norm(&p.grid, &p.vgrid);
            assert!(norm <= prev * (1.0 + 1e-13), "norm grew: {prev} -> {norm}");
            prev = norm;
        }
        assert!((state.mass(&p.grid, &p.vgrid) - mass0).abs() < 1e-10);
    }

    #[test]
    fn bgk_step_rejects_oversized_dt() {
        let vgrid = vgrid64();
        let basis = KernelBasis::new(&vgrid);
        let grid = SpatialGrid::new(8).unwrap();
        let state =
            PerturbativeState::new(vec![0.0; 8 * vgrid.len()], 0.1, Scaling::Ins, 1e-3).unwrap();
        let err = bgk_step(&state, 1.0, &grid, &vgrid, &basis).unwrap_err();
        assert!(matches!(err, Error::StepSize(_)));
    }

    #[test]
    fn steady_state_moments() {
        assert_eq!(steady_state(3), [1.0, 0.0, 1.5]);
        assert_eq!(steady_state(1), [1.0, 0.0, 0.5]);
        let vgrid = vgrid64();
        let grid = SpatialGrid::new(4).unwrap();
        let state =
            PerturbativeState::new(vec![0.0; 4 * vgrid.len()], 1.0, Scaling::Acoustic, 1e-3)
                .unwrap();
        let m = moments_from_h(&state, &grid, &vgrid).unwrap();
        for i in 0..4 {
            assert_eq!(m.rho[i], 1.0);
            assert_eq!(m.momentum[i], 0.0);
            assert_eq!(m.energy[i], 0.5);
        }
    }

    #[test]
    fn momentum_mode_matches_quadrature_oracle() {
        let vgrid = vgrid64();
        let basis = KernelBasis::new(&vgrid);
        let grid = SpatialGrid::new(2).unwrap();
        let delta = 1e-3;
        let n_w = vgrid.len();
        let mut h = vec![0.0; 2 * n_w];
        for i in 0..2 {
            h[i * n_w..(i + 1) * n_w].copy_from_slice(&basis.phi[1]);
        }
        let state = PerturbativeState::new(h, 1.0, Scaling::Acoustic, delta).unwrap();
        let m = moments_from_h(&state, &grid, &vgrid).unwrap();
        // direct quadrature of <v sqrt(M), phi_1>
        let v_sqrt_m: Vec<f64> = vgrid
            .nodes
            .iter()
            .zip(&vgrid.sqrt_m)
            .map(|(v, s)| v * s)
            .collect();
        let oracle = delta * vgrid.inner(&v_sqrt_m, &basis.phi[1]);
        assert!((m.momentum[0] - oracle).abs() < 1e-10);
    }

    #[test]
    fn acoustic_constant_state_is_stationary() {
        let grid = SpatialGrid::new(16).unwrap();
        let state = AcousticState {
            rho: vec![0.2; 16],
            u: vec![-0.1; 16],
            temp: vec![0.05; 16],
            d_v: 1,
            t: 0.0,
        };
        let next = acoustic_step(&state, 1e-3, &grid).unwrap();
        for i in 0..16 {
            assert!((next.rho[i] - 0.2).abs() < 1e-14);
            assert!((next.u[i] + 0.1).abs() < 1e-14);
            assert!((next.temp[i] - 0.05).abs() < 1e-14);
        }
    }

    #[test]
    fn characteristic_speeds_for_dv1() {
        // flux Jacobian for d_v = 1: [[0,1,0],[1,0,1],[0,2,0]];
        // char poly -l^3 + 3 l has roots {0, +-sqrt(3)}
        let p = |l: f64| -l * l * l + 3.0 * l;
        let c = sound_speed(1);
        assert!((c - 3f64.sqrt()).abs() < 1e-15);
        assert!(p(0.0).abs() < 1e-15);
        assert!(p(c).abs() < 1e-12);
        assert!(p(-c).abs() < 1e-12);
    }

    #[test]
    fn acoustic_step_rejects_oversized_dt() {
        let grid = SpatialGrid::new(8).unwrap();
        let state = AcousticState {
            rho: vec![0.0; 8],
            u: vec![0.0; 8],
            temp: vec![0.0; 8],
            d_v: 1,
            t: 0.0,
        };
        let err = acoustic_step(&state, 1.0, &grid).unwrap_err();
        assert!(matches!(err, Error::StepSize(_)));
    }

    #[test]
    fn acoustic_step_conserves_linear_invariants() {
        let grid = SpatialGrid::new(32).unwrap();
        let mut state = AcousticState {
            rho: (0..32).map(|i| (2.0 * PI * grid.center(i)).cos()).collect(),
            u: (0..32)
                .map(|i| 0.3 * (2.0 * PI * grid.center(i)).sin())
                .collect(),
            temp: (0..32)
                .map(|i| -0.2 * (4.0 * PI * grid.center(i)).cos())
                .collect(),
            d_v: 1,
            t: 0.0,
        };
        let sums = |s: &AcousticState| {
            (
                s.rho.iter().sum::<f64>() * grid.dx,
                s.u.iter().sum::<f64>() * grid.dx,
                s.temp.iter().sum::<f64>() * grid.dx,
            )
        };
        let (r0, u0, t0) = sums(&state);
        let dt = 0.4 * grid.dx / sound_speed(1);
        for _ in 0..20 {
            let next = acoustic_step(&state, dt, &grid).unwrap();
            let (r, u, t) = sums(&next);
            assert!((r - r0).abs() < 1e-13);
            assert!((u - u0).abs() < 1e-13);
            assert!((t - t0).abs() < 1e-13);
            state = next;
        }
    }

    #[test]
    fn limit_profile_trivials_and_round_trip() {
        let vgrid = vgrid64();
        let basis = KernelBasis::new(&vgrid);
        let grid = SpatialGrid::new(4).unwrap();
        let zero = vec![0.0; 4];
        let h = limit_profile(&zero, &zero, &zero, &vgrid).unwrap();
        assert!(h.iter().all(|v| *v == 0.0));

        let ones = vec![1.0; 4];
        let delta = 1e-3;
        let h = limit_profile(&ones, &zero, &zero, &vgrid).unwrap();
        let state = PerturbativeState::new(h.clone(), 1.0, Scaling::Acoustic, delta).unwrap();
        let m = moments_from_h(&state, &grid, &vgrid).unwrap();
        for i in 0..4 {
            assert!((m.rho[i] - (1.0 + delta)).abs() < 1e-8 * delta + 1e-10);
            assert!(m.momentum[i].abs() < 1e-12);
        }

        // the profile lies in the kernel span
        let projected = pi_l(&h, &basis, &vgrid).unwrap();
        for (a, b) in projected.iter().zip(&h) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn vt_trivial_cases() {
        let vgrid = vgrid64();
        let basis = KernelBasis::new(&vgrid);
        let n_w = vgrid.len();
        let field: Vec<f64> = (0..2 * n_w).map(|k| (k as f64 * 0.1).sin()).collect();
        let traj = vec![(0.0, field.clone()), (0.5, field.clone())];
        assert_eq!(vt_diagnostic(&traj, &traj, &vgrid).unwrap(), 0.0);

        // one stored field offset by delta0 * phi_0 (unit L2_v norm)
        let delta0 = 0.37;
        let mut shifted = field.clone();
        for i in 0..2 {
            for k in 0..n_w {
                shifted[i * n_w + k] += delta0 * basis.phi[0][k];
            }
        }
        let other = vec![(0.0, field.clone()), (0.5, shifted)];
        let vt = vt_diagnostic(&traj, &other, &vgrid).unwrap();
        assert!((vt - delta0).abs() < 1e-12, "V_T = {vt}");

        let bad = vec![(0.0, field.clone()), (0.6, field)];
        assert!(vt_diagnostic(&traj, &bad, &vgrid).is_err());
    }

    #[test]
    fn vt_decreases_with_eps() {
        let mut prev = f64::INFINITY;
        for eps in [0.5, 0.1, 0.02] {
            let p = problem(eps, 1e-3, 0.2);
            let z = ParameterVector(vec![]);
            let (h_traj, lim_traj) = p.paired_trajectories(&z, 8).unwrap();
            let vt = vt_diagnostic(&h_traj, &lim_traj, &p.vgrid).unwrap();
            assert!(
                vt <= prev * (1.0 + 1e-12),
                "V_T({eps}) = {vt} not below {prev}"
            );
            prev = vt;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn pi_l_idempotent_and_self_adjoint(seed in 0u64..10_000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let vgrid = VelocityGridR::new(32, 6.0).unwrap();
            let basis = KernelBasis::new(&vgrid);
            let a: Vec<f64> = (0..vgrid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..vgrid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let pa = pi_l(&a, &basis, &vgrid).unwrap();
            let ppa = pi_l(&pa, &basis, &vgrid).unwrap();
            for (x, y) in pa.iter().zip(&ppa) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let pb = pi_l(&b, &basis, &vgrid).unwrap();
            let lhs = vgrid.inner(&pa, &b);
            let rhs = vgrid.inner(&a, &pb);
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
