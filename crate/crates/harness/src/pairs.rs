//! Model-pair construction: wires the solvers of `bifi-core` into
//! high/low-fidelity closures with call counters.

use std::cell::Cell;
use std::rc::Rc;

use bifi_core::error::Result;
use bifi_core::perturbative::{PerturbativeProblem, Scaling, VelocityGridR};
use bifi_core::randomspace::{eval_affine_field, FieldSpec, ParameterVector, SpatialGrid};
use bifi_core::transport::{
    diffusion_solve, fine_prolong, transport_solve, InitialData, TransportProblem, VelocityGridGL,
};
use bifi_core::Snapshot;

use crate::config::{ExperimentConfig, PairKind};

type Solver = Box<dyn Fn(&ParameterVector) -> Result<Snapshot>>;

/// A high/low-fidelity solver pair at one fixed epsilon. Calls are counted so
/// experiments can audit that the offline stage runs the high-fidelity model
/// exactly N times.
pub struct ModelPair {
    high: Solver,
    low: Solver,
    high_calls: Rc<Cell<usize>>,
    low_calls: Rc<Cell<usize>>,
}

impl ModelPair {
    pub fn high(&self, z: &ParameterVector) -> Result<Snapshot> {
        self.high_calls.set(self.high_calls.get() + 1);
        (self.high)(z)
    }

    pub fn low(&self, z: &ParameterVector) -> Result<Snapshot> {
        self.low_calls.set(self.low_calls.get() + 1);
        (self.low)(z)
    }

    pub fn high_calls(&self) -> usize {
        self.high_calls.get()
    }

    pub fn low_calls(&self) -> usize {
        self.low_calls.get()
    }
}

/// Scattering field of the transport pairs on a given grid.
pub fn sigma_spec(cfg: &ExperimentConfig) -> FieldSpec {
    FieldSpec {
        base: cfg.sigma_base,
        base_cos_amp: 0.0,
        mode_amp: cfg.sigma_mode_amp,
        mode_decay: cfg.sigma_mode_decay,
        d_z: cfg.d_z,
        sigma_min: Some(cfg.sigma_min),
    }
}

/// Initial density perturbation of the bgk/acoustic pair: a fixed cosine base
/// with affine sine modes in z.
pub fn rho0_spec(cfg: &ExperimentConfig) -> FieldSpec {
    FieldSpec {
        base: 0.0,
        base_cos_amp: cfg.rho0_cos_amp,
        mode_amp: cfg.rho0_mode_amp,
        mode_decay: cfg.rho0_mode_decay,
        d_z: cfg.d_z,
        sigma_min: None,
    }
}

/// Transport problem on an `n_x` grid with the config's sigma field resampled
/// at that resolution.
pub fn transport_problem(
    cfg: &ExperimentConfig,
    eps: f64,
    n_x: usize,
    tag: &str,
) -> Result<TransportProblem> {
    let grid = SpatialGrid::new(n_x)?;
    let sigma = sigma_spec(cfg).build(&grid)?;
    Ok(TransportProblem {
        tag: tag.into(),
        sigma,
        sigma_a: cfg.sigma_a,
        eps,
        grid,
        vgrid: VelocityGridGL::new(cfg.n_v)?,
        t_final: cfg.t_final,
        c_cfl: cfg.c_cfl,
        initial: InitialData {
            mean: cfg.init_mean,
            cos_amp: cfg.init_cos_amp,
            mode: 1,
        },
    })
}

/// Kinetic/acoustic problem on the fine grid.
pub fn perturbative_problem(cfg: &ExperimentConfig, eps: f64) -> Result<PerturbativeProblem> {
    let grid = SpatialGrid::new(cfg.nx_fine)?;
    let rho0 = rho0_spec(cfg).build(&grid)?;
    Ok(PerturbativeProblem {
        scaling: Scaling::from_alpha(cfg.alpha)?,
        eps,
        delta: cfg.delta,
        grid,
        vgrid: VelocityGridR::new(cfg.n_w, cfg.v_max)?,
        t_final: cfg.t_final,
        c_cfl: cfg.c_cfl,
        rho0,
    })
}

pub fn build_pair(cfg: &ExperimentConfig, eps: f64) -> Result<ModelPair> {
    let (high, low): (Solver, Solver) = match cfg.pair {
        PairKind::TransportDiffusion => {
            let problem = transport_problem(cfg, eps, cfg.nx_fine, "transport")?;
            let grid = problem.grid.clone();
            let sigma = problem.sigma.clone();
            let initial = problem.initial;
            let c_cfl = cfg.c_cfl;
            let t_final = cfg.t_final;
            (
                Box::new(move |z| transport_solve(&problem, z)),
                Box::new(move |z| {
                    let sigma_vals = eval_affine_field(&sigma, z, &grid)?;
                    let rho0: Vec<f64> = (0..grid.n_x)
                        .map(|i| initial.density(grid.center(i)))
                        .collect();
                    diffusion_solve(&rho0, &sigma_vals, &grid, t_final, c_cfl, z)
                }),
            )
        }
        PairKind::TransportFineCoarse => {
            let fine = transport_problem(cfg, eps, cfg.nx_fine, "transport")?;
            let coarse = transport_problem(cfg, eps, cfg.nx_coarse, "transport-coarse")?;
            let fine_grid = fine.grid.clone();
            (
                Box::new(move |z| transport_solve(&fine, z)),
                Box::new(move |z| {
                    let snap = transport_solve(&coarse, z)?;
                    let up = fine_prolong(&snap.values, &coarse.grid, &fine_grid)?;
                    Snapshot::new(
                        "transport-coarse",
                        fine_grid.n_x,
                        1,
                        z.clone(),
                        vec![fine_grid.dx; fine_grid.n_x],
                        up,
                    )
                }),
            )
        }
        PairKind::BgkAcoustic => {
            let problem = perturbative_problem(cfg, eps)?;
            let problem_low = problem.clone();
            (
                Box::new(move |z| problem.bgk_solve_moments(z)),
                Box::new(move |z| problem_low.acoustic_solve_moments(z)),
            )
        }
    };
    Ok(ModelPair {
        high,
        low,
        high_calls: Rc::new(Cell::new(0)),
        low_calls: Rc::new(Cell::new(0)),
    })
}

/// Steps the kinetic model would need at this epsilon; lets the sweep skip
/// CFL-infeasible combinations instead of hanging.
pub fn estimated_steps(cfg: &ExperimentConfig, eps: f64) -> Result<f64> {
    let dt = match cfg.pair {
        PairKind::BgkAcoustic => perturbative_problem(cfg, eps)?.kinetic_dt(),
        _ => {
            let problem = transport_problem(cfg, eps, cfg.nx_fine, "transport")?;
            problem.cfl_dt(cfg.sigma_min)
        }
    };
    Ok(cfg.t_final / dt)
}
