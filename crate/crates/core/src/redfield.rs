//! Time-convolutionless second-order (Redfield) dynamics of the single
//! spin, its vectorised generator, and the speed-limit bounds on the
//! averaged OTOC built from them.

use log::warn;
use serde::Serialize;

use crate::bath::CorrelatorKernel;
use crate::error::{Error, Result};
use crate::exact::ChainEvolution;
use crate::grid::{cumulative_trapezoid, TimeGrid};
use crate::operator::{DenseOperator, C64};
use crate::params::{ChainParams, LiouvilleConvention, RelaxedIntegrand, StateBoundMode, StateSource};
use crate::spinchain::{decompose, Pauli};

pub use crate::operator::spectral_norm;

/// Floor applied before taking logarithms of nonpositive values.
pub const LOG_FLOOR: f64 = 1e-300;

/// Negative eigenvalues of the Redfield state below this are logged.
pub const POSITIVITY_WARN: f64 = -1e-3;

/// Interaction-picture `σ1z(t_n) = exp(iH_A t_n) σz exp(-iH_A t_n)`.
#[derive(Clone, Debug)]
pub struct SystemTrajectory {
    pub grid: TimeGrid,
    pub ops: Vec<DenseOperator>,
}

impl SystemTrajectory {
    /// `σz(t)` at half-step index `h` (time `h·dt/2`), linearly interpolated
    /// between grid points for odd `h`.
    fn at_half(&self, h: usize) -> DenseOperator {
        if h.is_multiple_of(2) {
            self.ops[h / 2].clone()
        } else {
            (&self.ops[h / 2] + &self.ops[h / 2 + 1]).scale_real(0.5)
        }
    }
}

pub fn system_trajectory(params: &ChainParams, grid: &TimeGrid) -> Result<SystemTrajectory> {
    let ha = decompose(params)?.system;
    let eig = ha.eigh()?;
    let z = Pauli::Z.matrix();
    let v = DenseOperator::from_mat(eig.vectors.clone());
    let zv = &(&v.dagger() * &z) * &v;
    let ops = grid
        .points()
        .into_iter()
        .map(|t| {
            let phase = |k: usize| C64::from_polar(1.0, eig.values[k] * t);
            let rotated = DenseOperator::from_fn(2, |i, k| phase(i) * zv.get(i, k) * phase(k).conj());
            &(&v * &rotated) * &v.dagger()
        })
        .collect();
    Ok(SystemTrajectory { grid: *grid, ops })
}

fn check_compatible(kernel: &CorrelatorKernel, traj: &SystemTrajectory) -> Result<()> {
    let (a, b) = (kernel.grid.dt(), traj.grid.dt());
    if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
        return Err(Error::domain(format!("kernel step {a} differs from trajectory step {b}")));
    }
    Ok(())
}

/// `Γ(t, s_k)` at half-step outer index `h` and grid inner index `k ≤ h/2`.
fn kernel_at_half(kernel: &CorrelatorKernel, h: usize, k: usize) -> Result<C64> {
    let m = h / 2;
    if h.is_multiple_of(2) {
        return kernel.at(m, k);
    }
    Ok(0.5 * (kernel.at(m, k)? + kernel.at(m + 1, k)?))
}

/// `Γ(t, t)` at half-step index `h`.
fn kernel_diag_half(kernel: &CorrelatorKernel, h: usize) -> Result<C64> {
    let m = h / 2;
    if h.is_multiple_of(2) || kernel.is_stationary() {
        return kernel.at(m, m);
    }
    Ok(0.5 * (kernel.at(m, m)? + kernel.at(m + 1, m + 1)?))
}

/// `Λ(t) = ∫_0^t Γ(t,s) σz(s) ds` by the trapezoid rule, at half-step
/// index `h`. Odd `h` adds a half cell `[t_m, t_m + dt/2]`.
fn memory_at_half(kernel: &CorrelatorKernel, traj: &SystemTrajectory, h: usize) -> Result<DenseOperator> {
    let m = h / 2;
    let dt = traj.grid.dt();
    let mut acc = DenseOperator::zeros(2);
    if m > 0 {
        for k in 0..=m {
            let w = if k == 0 || k == m { 0.5 * dt } else { dt };
            acc = &acc + &traj.ops[k].scale(kernel_at_half(kernel, h, k)? * w);
        }
    }
    if h % 2 == 1 {
        let w = 0.25 * dt;
        let near = kernel_at_half(kernel, h, m)?;
        let diag = kernel_diag_half(kernel, h)?;
        acc = &acc + &traj.ops[m].scale(near * w);
        acc = &acc + &traj.at_half(h).scale(diag * w);
    }
    Ok(acc)
}

fn ensure_covered(kernel: &CorrelatorKernel, traj: &SystemTrajectory, h: usize) -> Result<()> {
    let needed = h.div_ceil(2) + 1;
    if kernel.len() < needed || traj.ops.len() < needed {
        return Err(Error::domain(format!(
            "kernel covers {} grid points, {} needed for t = {}",
            kernel.len(),
            needed,
            0.5 * h as f64 * traj.grid.dt()
        )));
    }
    Ok(())
}

/// `Λ(t_n)`.
pub fn memory_operator(n: usize, kernel: &CorrelatorKernel, traj: &SystemTrajectory) -> Result<DenseOperator> {
    check_compatible(kernel, traj)?;
    ensure_covered(kernel, traj, 2 * n)?;
    memory_at_half(kernel, traj, 2 * n)
}

/// `-J² (σΛρ - Λρσ + ρΛ†σ - σρΛ†)`, which is `-J²(X + X†)` with
/// `X = [σ, Λρ]` for Hermitian `ρ` and stays linear for any `ρ`.
fn apply_generator(sigma: &DenseOperator, lambda: &DenseOperator, rho: &DenseOperator, j: f64) -> DenseOperator {
    let lr = lambda * rho;
    let rl = rho * &lambda.dagger();
    let x = &(sigma * &lr) - &(&lr * sigma);
    let y = &(&rl * sigma) - &(sigma * &rl);
    (&x + &y).scale_real(-j * j)
}

/// Right-hand side of the Redfield equation at grid index `n`.
pub fn redfield_rhs(
    rho: &DenseOperator,
    n: usize,
    kernel: &CorrelatorKernel,
    traj: &SystemTrajectory,
    j: f64,
) -> Result<DenseOperator> {
    let lambda = memory_operator(n, kernel, traj)?;
    Ok(apply_generator(&traj.ops[n], &lambda, rho, j))
}

/// 4×4 matrix `M` with `vec(ℒ(ρ)) = M vec(ρ)` under column stacking.
fn generator_matrix(sigma: &DenseOperator, lambda: &DenseOperator, j: f64) -> DenseOperator {
    let id = DenseOperator::identity(2);
    let sl = sigma * lambda;
    let ls = &lambda.dagger() * sigma;
    let terms = &(&id.kron(&sl) - &sigma.transpose().kron(lambda)) + &(&ls.transpose().kron(&id) - &lambda.conj().kron(sigma));
    terms.scale_real(-j * j)
}

/// `M_n`; the `i|ρ̇⟩ = L|ρ⟩` generator is `L_n = i M_n`.
pub fn liouvillian_matrix(
    n: usize,
    kernel: &CorrelatorKernel,
    traj: &SystemTrajectory,
    j: f64,
) -> Result<DenseOperator> {
    let lambda = memory_operator(n, kernel, traj)?;
    Ok(generator_matrix(&traj.ops[n], &lambda, j))
}

/// Column-stacking vectorisation.
pub fn vectorize(rho: &DenseOperator) -> Vec<C64> {
    let d = rho.dim();
    (0..d * d).map(|i| rho.get(i % d, i / d)).collect()
}

/// `(‖M - M†‖, ‖M + M†‖)`; the second equals `‖L - L†‖` for `L = iM`.
pub fn liouville_norms(m: &DenseOperator) -> (f64, f64) {
    let md = m.dagger();
    (spectral_norm(&(m - &md)), spectral_norm(&(m + &md)))
}

/// RK4 integration of the Redfield equation from `ρ_A(0) = |1⟩⟨1|`.
pub fn integrate_redfield(
    params: &ChainParams,
    kernel: &CorrelatorKernel,
    traj: &SystemTrajectory,
    grid: &TimeGrid,
) -> Result<Vec<DenseOperator>> {
    integrate_redfield_from(&DenseOperator::real_diagonal(&[0.0, 1.0]), params.j, kernel, traj, grid)
}

pub fn integrate_redfield_from(
    rho0: &DenseOperator,
    j: f64,
    kernel: &CorrelatorKernel,
    traj: &SystemTrajectory,
    grid: &TimeGrid,
) -> Result<Vec<DenseOperator>> {
    check_compatible(kernel, traj)?;
    let n = grid.len();
    ensure_covered(kernel, traj, 2 * (n - 1))?;
    let halves = 2 * n - 1;
    let lambdas = (0..halves)
        .map(|h| memory_at_half(kernel, traj, h))
        .collect::<Result<Vec<_>>>()?;
    let sigmas: Vec<DenseOperator> = (0..halves).map(|h| traj.at_half(h)).collect();
    let f = |h: usize, rho: &DenseOperator| apply_generator(&sigmas[h], &lambdas[h], rho, j);
    let dt = grid.dt();
    let mut states = Vec::with_capacity(n);
    let mut rho = rho0.clone();
    states.push(rho.clone());
    let mut warned = false;
    for step in 0..n - 1 {
        let h = 2 * step;
        let k1 = f(h, &rho);
        let k2 = f(h + 1, &(&rho + &k1.scale_real(0.5 * dt)));
        let k3 = f(h + 1, &(&rho + &k2.scale_real(0.5 * dt)));
        let k4 = f(h + 2, &(&rho + &k3.scale_real(dt)));
        let incr = &(&k1 + &k4) + &(&k2 + &k3).scale_real(2.0);
        rho = &rho + &incr.scale_real(dt / 6.0);
        if !warned {
            let lowest = rho.eigenvalues()?.first().copied().unwrap_or(0.0);
            if lowest < POSITIVITY_WARN {
                warn!("Redfield state loses positivity at t = {}: eigenvalue {lowest:e}", grid.t(step + 1));
                warned = true;
            }
        }
        states.push(rho.clone());
    }
    Ok(states)
}

/// Bounds and rates on a common grid.
#[derive(Clone, Debug, Serialize)]
pub struct BoundSeries {
    #[serde(skip)]
    pub grid: TimeGrid,
    pub otoc_exact: Vec<f64>,
    pub otoc_redfield: Vec<f64>,
    pub bound_liouville: Vec<f64>,
    pub bound_state_direct: Vec<f64>,
    pub bound_state_relaxed: Vec<f64>,
    pub rate_exact: Vec<f64>,
    pub rate_liouville: Vec<f64>,
    pub rate_state: Vec<f64>,
    /// Grid indices where a value was clamped before the logarithm.
    pub clamped: Vec<usize>,
    /// Integrands, kept for diagnostics.
    pub liouville_integrand: Vec<f64>,
    pub state_integrand: Vec<f64>,
    pub relaxed_integrand: Vec<f64>,
}

impl BoundSeries {
    pub fn len(&self) -> usize {
        self.otoc_exact.len()
    }

    pub fn is_empty(&self) -> bool {
        self.otoc_exact.is_empty()
    }

    /// State bound selected by `mode`.
    pub fn state_bound(&self, mode: StateBoundMode) -> &[f64] {
        match mode {
            StateBoundMode::DirectNorm => &self.bound_state_direct,
            StateBoundMode::Relaxed => &self.bound_state_relaxed,
        }
    }

    /// Grid indices violating `1 ≥ liouville ≥ direct ≥ relaxed`.
    pub fn ordering_violations(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&n| {
                let (l, d, r) = (
                    self.bound_liouville[n],
                    self.bound_state_direct[n],
                    self.bound_state_relaxed[n],
                );
                !(1.0 >= l && l >= d && d >= r)
            })
            .collect()
    }
}

/// Speed-limit bounds for `params`, with `otoc_exact` on the same grid.
/// `evo` supplies exact reduced states when `state_source = exact`.
pub fn qsl_bounds(
    params: &ChainParams,
    kernel: &CorrelatorKernel,
    grid: &TimeGrid,
    otoc_exact: &[f64],
    evo: Option<&ChainEvolution>,
) -> Result<BoundSeries> {
    if otoc_exact.len() != grid.len() {
        return Err(Error::domain("exact OTOC series does not match the grid"));
    }
    let traj = system_trajectory(params, grid)?;
    let j = params.j;
    let states = integrate_redfield(params, kernel, &traj, grid)?;
    let otoc_redfield: Vec<f64> = states.iter().map(|r| r.purity()).collect();

    let owned;
    let exact_states: Option<Vec<DenseOperator>> = match params.state_source {
        StateSource::Redfield => None,
        StateSource::Exact => {
            let evo = match evo {
                Some(e) => e,
                None => {
                    owned = ChainEvolution::new(params)?;
                    &owned
                }
            };
            // Exact states are Schrödinger-picture; move them to the
            // interaction picture of H_A used by the generator.
            let ha = decompose(params)?.system;
            let eig = ha.eigh()?;
            Some(
                grid.points()
                    .into_iter()
                    .map(|t| {
                        let u = crate::operator::spectral_function(&eig, |e| C64::from_polar(1.0, e * t));
                        &(&u * &evo.reduced_system(t)) * &u.dagger()
                    })
                    .collect(),
            )
        }
    };

    let mut liouville_integrand = Vec::with_capacity(grid.len());
    let mut state_integrand = Vec::with_capacity(grid.len());
    let mut relaxed_integrand = Vec::with_capacity(grid.len());
    for n in 0..grid.len() {
        let lambda = memory_operator(n, kernel, &traj)?;
        let m = generator_matrix(&traj.ops[n], &lambda, j);
        let (gen, schr) = liouville_norms(&m);
        liouville_integrand.push(match params.liouville_convention {
            LiouvilleConvention::Generator => gen,
            LiouvilleConvention::Schrodinger => schr,
        });
        let rho = exact_states.as_ref().map_or(&states[n], |s| &s[n]);
        state_integrand.push(spectral_norm(&apply_generator(&traj.ops[n], &lambda, rho, j)));
        let row: Vec<f64> = kernel
            .row(n)?
            .into_iter()
            .map(|g| match params.relaxed_integrand {
                RelaxedIntegrand::AbsRe => g.re.abs(),
                RelaxedIntegrand::Re => g.re,
            })
            .collect();
        let inner = cumulative_trapezoid(&row, grid.dt()).last().copied().unwrap_or(0.0);
        relaxed_integrand.push(4.0 * j * j * inner);
    }
    let dt = grid.dt();
    let exp_neg = |v: &[f64], factor: f64| -> Vec<f64> {
        cumulative_trapezoid(v, dt).into_iter().map(|x| (-factor * x).exp()).collect()
    };
    let mut series = BoundSeries {
        grid: *grid,
        otoc_exact: otoc_exact.to_vec(),
        otoc_redfield,
        bound_liouville: exp_neg(&liouville_integrand, 1.0),
        bound_state_direct: exp_neg(&state_integrand, 2.0),
        bound_state_relaxed: exp_neg(&relaxed_integrand, 2.0),
        rate_exact: Vec::new(),
        rate_liouville: Vec::new(),
        rate_state: Vec::new(),
        clamped: Vec::new(),
        liouville_integrand,
        state_integrand,
        relaxed_integrand,
    };
    scrambling_rate(&mut series, params.state_bound_mode);
    Ok(series)
}

/// `|ln x|`, clamping `x` at [`LOG_FLOOR`]; returns whether it clamped.
fn log_rate(x: f64) -> (f64, bool) {
    if x.is_nan() {
        (f64::NAN, false)
    } else if x > LOG_FLOOR {
        (x.ln().abs(), false)
    } else {
        (LOG_FLOOR.ln().abs(), true)
    }
}

/// Populates the rate fields from the exact OTOC, the Liouville bound and
/// the state bound selected by `mode`.
pub fn scrambling_rate(series: &mut BoundSeries, mode: StateBoundMode) {
    let mut clamped = Vec::new();
    let mut rates = |values: &[f64]| -> Vec<f64> {
        values
            .iter()
            .enumerate()
            .map(|(n, &v)| {
                let (r, c) = log_rate(v);
                if c {
                    clamped.push(n);
                }
                r
            })
            .collect()
    };
    let exact = rates(&series.otoc_exact);
    let liouville = rates(&series.bound_liouville);
    let state = rates(series.state_bound(mode));
    series.rate_exact = exact;
    series.rate_liouville = liouville;
    series.rate_state = state;
    clamped.sort_unstable();
    clamped.dedup();
    if !clamped.is_empty() {
        warn!("{} nonpositive values clamped before taking logarithms", clamped.len());
    }
    series.clamped = clamped;
}

/// Least-squares slope of `values` against `times` over `[t0, t1]`.
pub fn fit_slope(times: &[f64], values: &[f64], t0: f64, t1: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= t0 - 1e-12 && **t <= t1 + 1e-12)
        .map(|(t, v)| (*t, *v))
        .collect();
    if pts.len() < 2 {
        return Err(Error::domain(format!("fit window [{t0}, {t1}] holds fewer than two points")));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mv = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mv)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Empirical scrambling rate: slope of `rate_exact` over `[t0, t1]`.
pub fn empirical_rate(series: &BoundSeries, t0: f64, t1: f64) -> Result<f64> {
    fit_slope(&series.grid.points(), &series.rate_exact, t0, t1)
}

/// Trace of `ρ` minus one, and Hermiticity deviation.
pub fn state_defects(rho: &DenseOperator) -> (f64, f64) {
    ((rho.trace() - C64::new(1.0, 0.0)).norm(), rho.hermiticity_deviation())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::stationary_kernel;
    use crate::exact::exact_average_otoc;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize) -> (ChainParams, TimeGrid, CorrelatorKernel, SystemTrajectory) {
        let p = ChainParams::default().with_n(n);
        let grid = p.grid().unwrap();
        let kernel = stationary_kernel(&p, &grid).unwrap();
        let traj = system_trajectory(&p, &grid).unwrap();
        (p, grid, kernel, traj)
    }

    fn random_state(rng: &mut impl Rng) -> DenseOperator {
        let a = DenseOperator::from_fn(2, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let m = &a * &a.dagger();
        let tr = m.trace().re;
        m.scale_real(1.0 / tr)
    }

    /// `exp(A)` by scaled Taylor series.
    fn expm_series(a: &DenseOperator) -> DenseOperator {
        let scaled = a.scale_real(1.0 / 1024.0);
        let mut term = DenseOperator::identity(a.dim());
        let mut sum = term.clone();
        for k in 1..25 {
            term = (&term * &scaled).scale_real(1.0 / k as f64);
            sum = &sum + &term;
        }
        for _ in 0..10 {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn trajectory_trivial_cases() {
        let p = ChainParams::default().with_couplings(0.65, 0.0, 0.4);
        let grid = TimeGrid::new(0.1, 20).unwrap();
        let traj = system_trajectory(&p, &grid).unwrap();
        let z = Pauli::Z.matrix();
        assert_eq!(traj.ops[0].max_abs_diff(&z), 0.0);
        for op in &traj.ops {
            assert!(op.max_abs_diff(&z) < 1e-14);
        }
    }

    #[test]
    fn trajectory_matches_series_rotation() {
        let p = ChainParams::default().with_couplings(0.65, 0.9, 0.0);
        let grid = TimeGrid::new(0.5, 1).unwrap();
        let traj = system_trajectory(&p, &grid).unwrap();
        let ha = Pauli::X.matrix().scale_real(-0.9);
        let u = expm_series(&ha.scale(C64::new(0.0, -0.5)));
        let expected = &(&u.dagger() * &Pauli::Z.matrix()) * &u;
        assert!(traj.ops[1].max_abs_diff(&expected) < 1e-12);
        assert!((traj.ops[1].get(0, 0).re - 0.9f64.cos()).abs() < 1e-12);
        for op in &traj.ops {
            assert!(op.is_hermitian(1e-14));
            assert!((op.spectral_norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rhs_trivial_cases() {
        let (p, _, kernel, traj) = setup(6);
        let rho = DenseOperator::real_diagonal(&[0.3, 0.7]);
        assert_eq!(redfield_rhs(&rho, 0, &kernel, &traj, p.j).unwrap().max_abs(), 0.0);
        assert_eq!(redfield_rhs(&rho, 40, &kernel, &traj, 0.0).unwrap().max_abs(), 0.0);
        assert!(matches!(redfield_rhs(&rho, 500, &kernel, &traj, p.j), Err(Error::Domain(_))));
    }

    #[test]
    fn rhs_matches_term_by_term_oracle() {
        let (p, grid, kernel, traj) = setup(6);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_state(&mut rng);
        let n = (0.5 / (p.j * grid.dt())).round() as usize;
        let got = redfield_rhs(&rho, n, &kernel, &traj, p.j).unwrap();
        let (st, dt) = (&traj.ops[n], grid.dt());
        let mut expected = DenseOperator::zeros(2);
        for k in 0..=n {
            let w = if k == 0 || k == n { 0.5 * dt } else { dt };
            let gamma = kernel.at(n, k).unwrap();
            let ss = &traj.ops[k];
            let a = &(&(st * ss) * &rho) - &(&(ss * &rho) * st);
            let term = &a.scale(gamma) + &a.dagger().scale(gamma.conj());
            expected = &expected + &term.scale_real(-p.j * p.j * w);
        }
        assert!(got.max_abs_diff(&expected) < 1e-14);
        assert!(got.trace().norm() < 1e-14);
        assert!(got.hermiticity_deviation() < 1e-14);
    }

    #[test]
    fn vectorised_generator_matches_rhs() {
        let (p, grid, kernel, traj) = setup(6);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in (0..grid.len()).step_by(10) {
            let m = liouvillian_matrix(n, &kernel, &traj, p.j).unwrap();
            for _ in 0..20 {
                let rho = DenseOperator::from_fn(2, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                let v = vectorize(&rho);
                let mv: Vec<C64> = (0..4).map(|i| (0..4).map(|c| m.get(i, c) * v[c]).sum()).collect();
                let rhs = vectorize(&redfield_rhs(&rho, n, &kernel, &traj, p.j).unwrap());
                let err = mv.iter().zip(&rhs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                assert!(err < 1e-12);
            }
        }
        assert_eq!(liouvillian_matrix(0, &kernel, &traj, p.j).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn schrodinger_and_generator_norms_relate_through_i() {
        let (p, grid, kernel, traj) = setup(6);
        let n = (0.5 / (p.j * grid.dt())).round() as usize;
        let m = liouvillian_matrix(n, &kernel, &traj, p.j).unwrap();
        let l = m.scale(C64::new(0.0, 1.0));
        let direct = spectral_norm(&(&l - &l.dagger()));
        let (gen, schr) = liouville_norms(&m);
        assert!((direct - schr).abs() < 1e-12);
        assert!(direct > 0.0 && gen > 0.0);
    }

    #[test]
    fn spectral_norm_cases() {
        let d = DenseOperator::real_diagonal(&[3.0, -5.0]);
        assert!((spectral_norm(&d) - 5.0).abs() < 1e-14);
        let h = DenseOperator::from_real_fn(2, |i, k| {
            let s = if i == 1 && k == 1 { -1.0 } else { 1.0 };
            s * std::f64::consts::FRAC_1_SQRT_2
        });
        let u = &h * &Pauli::Z.matrix();
        assert!((spectral_norm(&u) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn frozen_without_coupling() {
        let (mut p, grid, kernel, traj) = setup(5);
        p.j = 0.0;
        let states = integrate_redfield(&p, &kernel, &traj, &grid).unwrap();
        for s in &states {
            assert_eq!(s, &states[0]);
        }
    }

    #[test]
    fn integration_preserves_trace_and_hermiticity() {
        let (p, grid, kernel, traj) = setup(6);
        for s in integrate_redfield(&p, &kernel, &traj, &grid).unwrap() {
            let (tr, herm) = state_defects(&s);
            assert!(tr < 1e-8 && herm < 1e-10);
        }
    }

    #[test]
    fn redfield_purity_tracks_exact_at_early_times() {
        let (p, grid, kernel, traj) = setup(8);
        let exact = exact_average_otoc(&p, &grid).unwrap();
        let states = integrate_redfield(&p, &kernel, &traj, &grid).unwrap();
        for (n, s) in states.iter().enumerate() {
            if p.j * grid.t(n) <= 0.6 + 1e-9 {
                assert!((s.purity() - exact.otoc[n]).abs() < 0.05);
            }
        }
    }

    #[test]
    fn bounds_start_at_one_and_decrease() {
        let (p, grid, kernel, _) = setup(6);
        let exact = exact_average_otoc(&p, &grid).unwrap();
        let b = qsl_bounds(&p, &kernel, &grid, &exact.otoc, None).unwrap();
        for s in [&b.bound_liouville, &b.bound_state_direct, &b.bound_state_relaxed] {
            assert_eq!(s[0], 1.0);
            assert!(s.windows(2).all(|w| w[1] <= w[0]));
        }
        assert!(b.state_integrand[0] == 0.0 && b.relaxed_integrand[0] == 0.0);
        assert!(b.clamped.is_empty());
    }

    #[test]
    fn exact_state_source_is_supported() {
        let (mut p, grid, kernel, _) = setup(5);
        let exact = exact_average_otoc(&p, &grid).unwrap();
        let redfield = qsl_bounds(&p, &kernel, &grid, &exact.otoc, None).unwrap();
        p.state_source = StateSource::Exact;
        let ex = qsl_bounds(&p, &kernel, &grid, &exact.otoc, None).unwrap();
        // Both start identical and stay close early on.
        assert_eq!(ex.bound_state_direct[0], 1.0);
        assert!((ex.bound_state_direct[20] - redfield.bound_state_direct[20]).abs() < 1e-3);
    }

    #[test]
    fn rates_and_slopes() {
        let grid = TimeGrid::new(0.01, 200).unwrap();
        let t = grid.points();
        let ones = vec![1.0; grid.len()];
        let decaying: Vec<f64> = t.iter().map(|x| (-0.7 * x).exp()).collect();
        let mut b = BoundSeries {
            grid,
            otoc_exact: decaying.clone(),
            otoc_redfield: ones.clone(),
            bound_liouville: ones.clone(),
            bound_state_direct: ones.clone(),
            bound_state_relaxed: vec![0.0; grid.len()],
            rate_exact: vec![],
            rate_liouville: vec![],
            rate_state: vec![],
            clamped: vec![],
            liouville_integrand: vec![],
            state_integrand: vec![],
            relaxed_integrand: vec![],
        };
        scrambling_rate(&mut b, StateBoundMode::Relaxed);
        assert!(b.rate_liouville.iter().all(|&r| r == 0.0));
        assert!((empirical_rate(&b, 0.0, 1.0).unwrap() - 0.7).abs() < 1e-6);
        assert_eq!(b.clamped.len(), grid.len());
        assert!(b.rate_state.iter().all(|r| r.is_finite()));
    }
}
