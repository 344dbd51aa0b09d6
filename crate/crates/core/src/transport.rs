//! 1-D linear transport in slab geometry via the micro-macro
//! asymptotic-preserving scheme, its diffusion limit, and inter-grid
//! transfer for fine/coarse model pairs.
//!
//! The distribution splits as f = rho + eps * g with [g] = 0; rho lives at
//! cell centers, g at interfaces x velocity nodes. One step treats the
//! transport of g explicitly with upwinding and the stiff relaxation
//! implicitly (a pointwise division, since scattering is diagonal here).
//! As eps -> 0 the update degenerates to an explicit heat equation with
//! kappa = 1/(3 sigma).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::randomspace::{eval_affine_field, AffineField, ParameterVector, SpatialGrid};
use crate::Snapshot;

/// Gauss-Legendre velocity grid on (-1, 1); weights sum to 2 so the average
/// operator is [phi] = 1/2 sum_m w_m phi(v_m).
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGridGL {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl VelocityGridGL {
    pub fn new(n_v: usize) -> Result<Self> {
        if n_v == 0 {
            return Err(Error::InvalidArgument("n_v must be >= 1".into()));
        }
        let (nodes, weights) = gauss_legendre(n_v);
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// [phi] = 1/2 sum_m w_m phi_m for a single spatial location.
    pub fn average(&self, phi: &[f64]) -> f64 {
        0.5 * self
            .weights
            .iter()
            .zip(phi)
            .map(|(w, p)| w * p)
            .sum::<f64>()
    }
}

/// Nodes and weights of n-point Gauss-Legendre quadrature on [-1, 1],
/// by Newton iteration on the Legendre recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 1..=m {
        let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        loop {
            // Legendre P_n(x) and derivative by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let (p, p_prev) = if n == 1 { (x, 1.0) } else { (p1, p0) };
            let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
            let dx = -p / dp;
            x += dx;
            if dx.abs() < 1e-15 {
                let w = 2.0 / ((1.0 - x * x) * dp * dp);
                nodes[i - 1] = -x;
                nodes[n - i] = x;
                weights[i - 1] = w;
                weights[n - i] = w;
                break;
            }
        }
    }
    // exact zero at the middle node for odd n
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Micro-macro state: density at centers, zero-average perturbation g at
/// interfaces x velocity nodes (row-major, interface outer).
#[derive(Debug, Clone)]
pub struct MicroMacroState {
    pub rho: Vec<f64>,
    pub g: Vec<f64>,
    pub t: f64,
    pub eps: f64,
}

impl MicroMacroState {
    pub fn g_at(&self, interface: usize, n_v: usize) -> &[f64] {
        &self.g[interface * n_v..(interface + 1) * n_v]
    }

    /// Max over interfaces of |[g]|; the decomposition keeps this at rounding level.
    pub fn max_g_average(&self, vgrid: &VelocityGridGL) -> f64 {
        let n_v = vgrid.len();
        (0..self.rho.len())
            .map(|i| vgrid.average(self.g_at(i, n_v)).abs())
            .fold(0.0, f64::max)
    }

    pub fn total_mass(&self, dx: f64) -> f64 {
        self.rho.iter().sum::<f64>() * dx
    }
}

/// Isotropic initial density profile mean + amp * cos(2 pi mode x).
#[derive(Debug, Clone, Copy)]
pub struct InitialData {
    pub mean: f64,
    pub cos_amp: f64,
    pub mode: usize,
}

impl InitialData {
    pub fn density(&self, x: f64) -> f64 {
        self.mean + self.cos_amp * (2.0 * PI * self.mode as f64 * x).cos()
    }
}

/// Full problem description for one transport solve.
#[derive(Debug, Clone)]
pub struct TransportProblem {
    pub tag: String,
    pub sigma: AffineField,
    /// Uniform absorption coefficient; 0 reproduces the pure-scattering model.
    pub sigma_a: f64,
    pub eps: f64,
    pub grid: SpatialGrid,
    pub vgrid: VelocityGridGL,
    pub t_final: f64,
    pub c_cfl: f64,
    pub initial: InitialData,
}

impl TransportProblem {
    /// Uniform-in-eps step size: the parabolic scale 3 sigma_min dx^2 / 2
    /// governs the diffusive regime, the hyperbolic scale eps dx the kinetic
    /// one; the implicit relaxation keeps the larger of the two stable.
    pub fn cfl_dt(&self, sigma_min: f64) -> f64 {
        let dx = self.grid.dx;
        self.c_cfl * stable_dt(sigma_min, self.eps, dx)
    }
}

fn stable_dt(sigma_min: f64, eps: f64, dx: f64) -> f64 {
    (1.5 * sigma_min * dx * dx).max(eps * dx)
}

/// [phi] at every interface for interface x velocity data.
pub fn velocity_average(phi: &[f64], vgrid: &VelocityGridGL) -> Result<Vec<f64>> {
    let n_v = vgrid.len();
    if n_v == 0 || !phi.len().is_multiple_of(n_v) {
        return Err(Error::InvalidArgument(format!(
            "{} values do not tile velocity grid of size {n_v}",
            phi.len()
        )));
    }
    Ok(phi.chunks(n_v).map(|row| vgrid.average(row)).collect())
}

/// Decompose f_in(x_i, v_m) into rho = [f] and g = (f - rho)/eps interpolated
/// to interfaces; [g] = 0 is enforced by subtracting the velocity average.
pub fn micro_macro_init(
    f_in: &[f64],
    eps: f64,
    grid: &SpatialGrid,
    vgrid: &VelocityGridGL,
) -> Result<MicroMacroState> {
    if eps <= 0.0 {
        return Err(Error::InvalidArgument(format!("eps = {eps} must be > 0")));
    }
    let n_x = grid.n_x;
    let n_v = vgrid.len();
    if f_in.len() != n_x * n_v {
        return Err(Error::InvalidArgument(format!(
            "f_in has {} values, expected {}",
            f_in.len(),
            n_x * n_v
        )));
    }
    let rho: Vec<f64> = (0..n_x)
        .map(|i| vgrid.average(&f_in[i * n_v..(i + 1) * n_v]))
        .collect();
    let mut g = vec![0.0; n_x * n_v];
    for i in 0..n_x {
        let right = (i + 1) % n_x;
        for m in 0..n_v {
            let h_left = (f_in[i * n_v + m] - rho[i]) / eps;
            let h_right = (f_in[right * n_v + m] - rho[right]) / eps;
            g[i * n_v + m] = 0.5 * (h_left + h_right);
        }
    }
    for i in 0..n_x {
        let avg = vgrid.average(&g[i * n_v..(i + 1) * n_v]);
        for m in 0..n_v {
            g[i * n_v + m] -= avg;
        }
    }
    Ok(MicroMacroState {
        rho,
        g,
        t: 0.0,
        eps,
    })
}

/// One first-order IMEX step of the micro-macro system.
///
/// g first: explicit upwind transport with the velocity average removed and
/// the density gradient source, then the implicit relaxation division;
/// rho second, from the conservative flux differences of [v g^{n+1}].
pub fn micro_macro_step(
    state: &MicroMacroState,
    sigma_centers: &[f64],
    sigma_a: f64,
    dt: f64,
    grid: &SpatialGrid,
    vgrid: &VelocityGridGL,
) -> Result<MicroMacroState> {
    let n_x = grid.n_x;
    let n_v = vgrid.len();
    let dx = grid.dx;
    let eps = state.eps;
    if sigma_centers.len() != n_x {
        return Err(Error::InvalidArgument(format!(
            "sigma has {} nodes for {} cells",
            sigma_centers.len(),
            n_x
        )));
    }
    if state.rho.len() != n_x || state.g.len() != n_x * n_v {
        return Err(Error::InvalidArgument("state does not match grids".into()));
    }
    let sigma_min = sigma_centers.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let dt_max = stable_dt(sigma_min, eps, dx);
    if dt > dt_max * (1.0 + 1e-9) {
        return Err(Error::StepSize(format!(
            "dt = {dt} exceeds the stability limit {dt_max}"
        )));
    }

    let mut g_new = vec![0.0; n_x * n_v];
    for i in 0..n_x {
        let left = (i + n_x - 1) % n_x;
        let right = (i + 1) % n_x;
        // upwinded v d_x g at interface i, per velocity node
        let mut transport = vec![0.0; n_v];
        for (m, &v) in vgrid.nodes.iter().enumerate() {
            let dg = if v > 0.0 {
                (state.g[i * n_v + m] - state.g[left * n_v + m]) / dx
            } else if v < 0.0 {
                (state.g[right * n_v + m] - state.g[i * n_v + m]) / dx
            } else {
                0.0
            };
            transport[m] = v * dg;
        }
        let transport_avg = vgrid.average(&transport);
        let drho = (state.rho[right] - state.rho[i]) / dx;
        let sigma_face = 0.5 * (sigma_centers[i] + sigma_centers[right]);
        let relax = 1.0 + dt * sigma_face / (eps * eps);
        for (m, &v) in vgrid.nodes.iter().enumerate() {
            let g_star = state.g[i * n_v + m]
                - dt / eps * (transport[m] - transport_avg)
                - dt / (eps * eps) * v * drho;
            g_new[i * n_v + m] = g_star / relax;
        }
    }

    let flux: Vec<f64> = (0..n_x)
        .map(|i| {
            0.5 * vgrid
                .weights
                .iter()
                .zip(&vgrid.nodes)
                .zip(&g_new[i * n_v..(i + 1) * n_v])
                .map(|((w, v), g)| w * v * g)
                .sum::<f64>()
        })
        .collect();
    let rho_new: Vec<f64> = (0..n_x)
        .map(|i| {
            let left = (i + n_x - 1) % n_x;
            state.rho[i] - dt / dx * (flux[i] - flux[left]) - dt * sigma_a * state.rho[i]
        })
        .collect();

    Ok(MicroMacroState {
        rho: rho_new,
        g: g_new,
        t: state.t + dt,
        eps,
    })
}

/// Evaluate sigma at z, initialize from the isotropic profile, step to T and
/// return the density as a snapshot with dx quadrature weights.
pub fn transport_solve(problem: &TransportProblem, z: &ParameterVector) -> Result<Snapshot> {
    Ok(transport_solve_full(problem, z)?.0)
}

/// Like [`transport_solve`] but also returns the final micro-macro state,
/// which the mesh-order studies need for the g-component of the energy norm.
pub fn transport_solve_full(
    problem: &TransportProblem,
    z: &ParameterVector,
) -> Result<(Snapshot, MicroMacroState)> {
    let grid = &problem.grid;
    let vgrid = &problem.vgrid;
    let n_v = vgrid.len();
    let sigma = eval_affine_field(&problem.sigma, z, grid)?;
    let f_in: Vec<f64> = (0..grid.n_x)
        .flat_map(|i| {
            let rho = problem.initial.density(grid.center(i));
            std::iter::repeat_n(rho, n_v)
        })
        .collect();
    let mut state = micro_macro_init(&f_in, problem.eps, grid, vgrid)?;
    let sigma_min = sigma.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let dt0 = problem.cfl_dt(sigma_min);
    while state.t < problem.t_final {
        let dt = dt0.min(problem.t_final - state.t);
        if dt <= problem.t_final * 1e-15 {
            break;
        }
        state = micro_macro_step(&state, &sigma, problem.sigma_a, dt, grid, vgrid)?;
    }
    let snapshot = Snapshot::new(
        problem.tag.clone(),
        grid.n_x,
        1,
        z.clone(),
        vec![grid.dx; grid.n_x],
        state.rho.clone(),
    )?;
    Ok((snapshot, state))
}

/// Explicit solver for the limit equation d_t rho = d_x(kappa(z) d_x rho),
/// kappa = 1/(3 sigma), with centered second-order fluxes.
pub fn diffusion_solve(
    rho0: &[f64],
    sigma_centers: &[f64],
    grid: &SpatialGrid,
    t_final: f64,
    c_cfl: f64,
    z: &ParameterVector,
) -> Result<Snapshot> {
    let n_x = grid.n_x;
    if rho0.len() != n_x || sigma_centers.len() != n_x {
        return Err(Error::InvalidArgument(
            "rho0/sigma do not match the grid".into(),
        ));
    }
    if let Some(bad) = sigma_centers.iter().find(|&&s| s <= 0.0) {
        return Err(Error::Domain(format!(
            "scattering coefficient {bad} is not positive"
        )));
    }
    let dx = grid.dx;
    let kappa_face: Vec<f64> = (0..n_x)
        .map(|i| {
            let right = (i + 1) % n_x;
            let sigma_face = 0.5 * (sigma_centers[i] + sigma_centers[right]);
            1.0 / (3.0 * sigma_face)
        })
        .collect();
    let kappa_max = kappa_face.iter().fold(0.0f64, |a, &b| a.max(b));
    let dt0 = c_cfl * dx * dx / (2.0 * kappa_max);

    let mut rho = rho0.to_vec();
    let mut t = 0.0;
    while t < t_final {
        let dt = dt0.min(t_final - t);
        if dt <= t_final * 1e-15 {
            break;
        }
        let flux: Vec<f64> = (0..n_x)
            .map(|i| kappa_face[i] * (rho[(i + 1) % n_x] - rho[i]) / dx)
            .collect();
        rho = (0..n_x)
            .map(|i| {
                let left = (i + n_x - 1) % n_x;
                rho[i] + dt / dx * (flux[i] - flux[left])
            })
            .collect();
        t += dt;
    }
    Snapshot::new("diffusion", n_x, 1, z.clone(), vec![dx; n_x], rho)
}

/// Restrict center values to a coarser commensurate grid by cell averaging.
pub fn coarse_restrict(
    values: &[f64],
    from_grid: &SpatialGrid,
    to_grid: &SpatialGrid,
) -> Result<Vec<f64>> {
    if values.len() != from_grid.n_x {
        return Err(Error::InvalidArgument(
            "values do not match from_grid".into(),
        ));
    }
    if to_grid.n_x == 0 || !from_grid.n_x.is_multiple_of(to_grid.n_x) {
        return Err(Error::InvalidArgument(format!(
            "grids are incommensurate: {} -> {}",
            from_grid.n_x, to_grid.n_x
        )));
    }
    let r = from_grid.n_x / to_grid.n_x;
    Ok((0..to_grid.n_x)
        .map(|j| values[j * r..(j + 1) * r].iter().sum::<f64>() / r as f64)
        .collect())
}

/// Prolong coarse center values to a finer commensurate grid by periodic
/// linear reconstruction with the central slope; restrict(prolong(c)) = c
/// because the within-cell offsets are symmetric.
pub fn fine_prolong(
    values: &[f64],
    from_grid: &SpatialGrid,
    to_grid: &SpatialGrid,
) -> Result<Vec<f64>> {
    if values.len() != from_grid.n_x {
        return Err(Error::InvalidArgument(
            "values do not match from_grid".into(),
        ));
    }
    if from_grid.n_x == 0 || !to_grid.n_x.is_multiple_of(from_grid.n_x) {
        return Err(Error::InvalidArgument(format!(
            "grids are incommensurate: {} -> {}",
            from_grid.n_x, to_grid.n_x
        )));
    }
    let n_c = from_grid.n_x;
    let r = to_grid.n_x / n_c;
    let mut fine = vec![0.0; to_grid.n_x];
    for j in 0..n_c {
        let slope = (values[(j + 1) % n_c] - values[(j + n_c - 1) % n_c]) / (2.0 * from_grid.dx);
        for k in 0..r {
            let offset = (k as f64 + 0.5 - r as f64 / 2.0) * to_grid.dx;
            fine[j * r + k] = values[j] + slope * offset;
        }
    }
    Ok(fine)
}

/// Discrete L2 norm of a center grid function: ||mu||^2 = sum mu_i^2 dx.
pub fn discrete_norm(mu: &[f64], dx: f64) -> f64 {
    (mu.iter().map(|m| m * m).sum::<f64>() * dx).sqrt()
}

/// Interface norm |||phi|||^2 = sum_i [phi_{i+1/2}^2] dx for interface x
/// velocity data.
pub fn interface_norm(phi: &[f64], dx: f64, vgrid: &VelocityGridGL) -> Result<f64> {
    let per_interface = velocity_average(&phi.iter().map(|p| p * p).collect::<Vec<_>>(), vgrid)?;
    Ok((per_interface.iter().sum::<f64>() * dx).sqrt())
}
