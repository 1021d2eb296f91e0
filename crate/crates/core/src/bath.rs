//! Environment two-point functions `Γ(t,s) = tr[σ2z(t) σ2z(s) ρ_B]` for the
//! bath chain (sites 2..N), plus the closed-form free-fermion correlator of
//! the integrable antiferromagnet.

use std::f64::consts::PI;
use std::io::Write;

use faer::linalg::solvers::Solve;
use faer::Mat;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::{BathThermal, ChainEvolution};
use crate::grid::TimeGrid;
use crate::operator::{DenseOperator, C64, ONE, ZERO};
use crate::params::{AfmModes, BathMode, ChainParams, CorrelatorMode, Propagation};
use crate::quadrature;
use crate::spinchain::chain_matrix;

/// Tolerance on `Γ(t,t) = 1` and `|Γ| ≤ 1`.
pub const KERNEL_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub enum KernelValues {
    /// `Γ(τ_n)` for `τ_n = n·dt ≥ 0`.
    Stationary(Vec<C64>),
    /// Row `m` holds `Γ(t_m, s_k)` for `k = 0..=m`.
    TwoTime(Vec<Vec<C64>>),
}

#[derive(Clone, Debug)]
pub struct CorrelatorKernel {
    pub grid: TimeGrid,
    pub values: KernelValues,
}

impl CorrelatorKernel {
    pub fn stationary(grid: TimeGrid, values: Vec<C64>) -> Self {
        Self {
            grid,
            values: KernelValues::Stationary(values),
        }
    }

    pub fn two_time(grid: TimeGrid, rows: Vec<Vec<C64>>) -> Self {
        Self {
            grid,
            values: KernelValues::TwoTime(rows),
        }
    }

    pub fn is_stationary(&self) -> bool {
        matches!(self.values, KernelValues::Stationary(_))
    }

    /// Number of outer grid points covered.
    pub fn len(&self) -> usize {
        match &self.values {
            KernelValues::Stationary(v) => v.len(),
            KernelValues::TwoTime(rows) => rows.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stationary value at lag index `n`, conjugated for negative lags.
    pub fn at_lag(&self, n: isize) -> Option<C64> {
        match &self.values {
            KernelValues::Stationary(v) => {
                let x = *v.get(n.unsigned_abs())?;
                Some(if n < 0 { x.conj() } else { x })
            }
            KernelValues::TwoTime(_) => None,
        }
    }

    /// `Γ(t_m, s_k)`. Stationary kernels accept any `k`; two-time kernels
    /// store `k ≤ m` only.
    pub fn at(&self, m: usize, k: usize) -> Result<C64> {
        let missing = || Error::domain(format!("kernel has no value at ({m}, {k})"));
        match &self.values {
            KernelValues::Stationary(_) => self.at_lag(m as isize - k as isize).ok_or_else(missing),
            KernelValues::TwoTime(rows) => rows.get(m).and_then(|r| r.get(k)).copied().ok_or_else(missing),
        }
    }

    /// `Γ(t_m, s_k)` for `k = 0..=m`.
    pub fn row(&self, m: usize) -> Result<Vec<C64>> {
        (0..=m).map(|k| self.at(m, k)).collect()
    }

    /// `Γ(t, t) = 1` and `|Γ| ≤ 1`, both to `tol`.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        for m in 0..self.len() {
            let diag = self.at(m, m)?;
            if (diag - ONE).norm() > tol {
                return Err(Error::numerical(format!(
                    "kernel diagonal at t = {} is {diag}, expected 1",
                    self.grid.t(m)
                )));
            }
            for k in 0..=m {
                let v = self.at(m, k)?;
                if v.norm() > 1.0 + tol {
                    return Err(Error::numerical(format!(
                        "|Γ| = {} exceeds 1 at ({m}, {k})",
                        v.norm()
                    )));
                }
            }
            if self.is_stationary() {
                break;
            }
        }
        Ok(())
    }

    /// Largest `|Γ|` on the stored grid.
    pub fn max_abs(&self) -> f64 {
        match &self.values {
            KernelValues::Stationary(v) => v.iter().map(|x| x.norm()).fold(0.0, f64::max),
            KernelValues::TwoTime(rows) => rows.iter().flatten().map(|x| x.norm()).fold(0.0, f64::max),
        }
    }

    /// Largest pointwise difference over the common part of two kernels.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        let n = self.len().min(other.len());
        let mut worst = 0.0f64;
        for m in 0..n {
            for k in 0..=m {
                worst = worst.max((self.at(m, k)? - other.at(m, k)?).norm());
            }
        }
        Ok(worst)
    }

    /// First grid time at which `|Γ(τ)|` (or `|Γ(t, 0)|`) drops below
    /// `threshold`.
    pub fn decay_time(&self, threshold: f64) -> Option<f64> {
        (0..self.len())
            .find(|&m| self.at(m, 0).map(|v| v.norm() < threshold).unwrap_or(false))
            .map(|m| self.grid.t(m))
    }

    /// CSV with columns `t,s_or_tau,re_gamma,im_gamma`. Stationary kernels
    /// write one row per lag with `t = τ`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,s_or_tau,re_gamma,im_gamma")?;
        match &self.values {
            KernelValues::Stationary(v) => {
                for (n, x) in v.iter().enumerate() {
                    let t = self.grid.t(n);
                    writeln!(w, "{},{},{},{}", fmt_sci(t), fmt_sci(t), fmt_sci(x.re), fmt_sci(x.im))?;
                }
            }
            KernelValues::TwoTime(rows) => {
                for (m, row) in rows.iter().enumerate() {
                    for (k, x) in row.iter().enumerate() {
                        writeln!(
                            w,
                            "{},{},{},{}",
                            fmt_sci(self.grid.t(m)),
                            fmt_sci(self.grid.t(k)),
                            fmt_sci(x.re),
                            fmt_sci(x.im)
                        )?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Twelve significant digits in scientific notation.
pub fn fmt_sci(x: f64) -> String {
    // -0 prints as "-0.00000000000e0"; normalise so files are sign-stable.
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.11e}")
}

/// `exp(iHt) op exp(-iHt)`.
pub fn heisenberg_operator(op: &DenseOperator, h: &DenseOperator, t: f64) -> Result<DenseOperator> {
    if op.dim() != h.dim() {
        return Err(Error::domain("operator and Hamiltonian dimensions differ"));
    }
    if t == 0.0 {
        return Ok(op.clone());
    }
    let eig = h.eigh()?;
    let d = op.dim();
    let v = &eig.vectors;
    let phased = Mat::from_fn(d, d, |i, j| v[(i, j)] * C64::from_polar(1.0, eig.values[j] * t));
    let left: Mat<C64> = &phased * v.adjoint();
    let out: Mat<C64> = &left * op.as_mat() * left.adjoint();
    Ok(DenseOperator::from_mat(out))
}

/// Bath spectrum with `σ2z` (the first bath site) in the `H_B` eigenbasis.
pub struct BathSpectrum {
    pub thermal: BathThermal,
    /// `Wᵀ σz W`, real symmetric.
    pub coupling: Mat<f64>,
}

impl BathSpectrum {
    pub fn new(params: &ChainParams) -> Result<Self> {
        Ok(Self::from_thermal(BathThermal::new(params)?))
    }

    pub fn from_thermal(thermal: BathThermal) -> Self {
        let db = thermal.dim();
        let w = &thermal.vectors;
        // σz on the most significant bath qubit is diagonal: +1 on the upper half.
        let zw = Mat::from_fn(db, db, |i, j| if i < db / 2 { w[(i, j)] } else { -w[(i, j)] });
        let coupling: Mat<f64> = w.transpose() * &zw;
        Self { thermal, coupling }
    }

    pub fn dim(&self) -> usize {
        self.thermal.dim()
    }

    /// `σ2z(t)` in the eigenbasis: `Z̃_jk exp(i(e_j - e_k)t)`.
    fn evolved_coupling(&self, t: f64) -> Mat<C64> {
        let e = &self.thermal.energies;
        let z = &self.coupling;
        Mat::from_fn(self.dim(), self.dim(), |j, k| {
            C64::from_polar(z[(j, k)], (e[j] - e[k]) * t)
        })
    }

    /// `Γ(τ) = Σ_jk p_j Z̃_jk² exp(i(e_j - e_k)τ)`.
    pub fn thermal_correlator(&self, tau: f64) -> C64 {
        let e = &self.thermal.energies;
        let p = &self.thermal.populations;
        let z = &self.coupling;
        let d = self.dim();
        let mut acc = ZERO;
        for j in 0..d {
            if p[j] == 0.0 {
                continue;
            }
            let mut row = ZERO;
            for k in 0..d {
                let zz = z[(j, k)] * z[(j, k)];
                row += C64::from_polar(zz, -e[k] * tau);
            }
            acc += row * C64::from_polar(p[j], e[j] * tau);
        }
        acc
    }

    /// Two-time function `tr[Z(t_m) Z(s_k) R(t_m)]` for `k ≤ m`, with
    /// `state(m)` the bath state in the eigenbasis.
    pub fn two_time_kernel(
        &self,
        grid: &TimeGrid,
        state: impl Fn(usize) -> Mat<C64> + Sync,
    ) -> CorrelatorKernel {
        let d = self.dim();
        let e = &self.thermal.energies;
        let n = grid.len();
        // v̄_l(s_k) for every grid time, columns indexed by k.
        let vbar = Mat::from_fn(d, n, |l, k| C64::from_polar(1.0, -e[l] * grid.t(k)));
        let rows: Vec<Vec<C64>> = (0..n)
            .into_par_iter()
            .map(|m| {
                let r = state(m);
                let q: Mat<C64> = &r * self.evolved_coupling(grid.t(m));
                let p = Mat::from_fn(d, d, |k, l| q[(l, k)] * self.coupling[(k, l)]);
                let pv: Mat<C64> = &p * vbar.as_ref().subcols(0, m + 1);
                (0..=m)
                    .map(|s| {
                        let mut acc = ZERO;
                        for k in 0..d {
                            acc += vbar[(k, s)].conj() * pv[(k, s)];
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        CorrelatorKernel::two_time(*grid, rows)
    }
}

/// Thermal stationary kernel using the configured propagation backend.
pub fn stationary_kernel(params: &ChainParams, grid: &TimeGrid) -> Result<CorrelatorKernel> {
    params.validate()?;
    match params.propagation {
        Propagation::Eigen => {
            let bath = BathSpectrum::new(params)?;
            let values = (0..grid.len())
                .into_par_iter()
                .map(|n| bath.thermal_correlator(grid.t(n)))
                .collect();
            Ok(CorrelatorKernel::stationary(*grid, values))
        }
        Propagation::CrankNicolson => crank_nicolson_kernel(params, grid),
    }
}

/// Stationary kernel from Crank–Nicolson steps `(I + iH dt/2)⁻¹(I - iH dt/2)`
/// applied to `R = σz ρ_β`, with `Γ(τ_n) = tr[σz R_n]`.
pub fn crank_nicolson_kernel(params: &ChainParams, grid: &TimeGrid) -> Result<CorrelatorKernel> {
    params.validate()?;
    let thermal = BathThermal::new(params)?;
    let rho = thermal.density_matrix();
    let hb = chain_matrix(params.n - 1, params.model, params.j, params.h, params.g);
    let d = hb.nrows();
    let half = C64::new(0.0, 0.5 * grid.dt());
    let plus = Mat::from_fn(d, d, |i, j| {
        let id = if i == j { ONE } else { ZERO };
        id + half * hb[(i, j)]
    });
    let minus = Mat::from_fn(d, d, |i, j| {
        let id = if i == j { ONE } else { ZERO };
        id - half * hb[(i, j)]
    });
    let step: Mat<C64> = plus.partial_piv_lu().solve(&minus);
    let sign = |i: usize| if i < d / 2 { 1.0 } else { -1.0 };
    let mut r = Mat::from_fn(d, d, |i, j| rho.get(i, j) * sign(i));
    let mut values = Vec::with_capacity(grid.len());
    for n in 0..grid.len() {
        if n > 0 {
            let tmp: Mat<C64> = &step * &r;
            r = &tmp * step.adjoint();
        }
        values.push((0..d).map(|i| r[(i, i)] * sign(i)).sum());
    }
    Ok(CorrelatorKernel::stationary(*grid, values))
}

/// `Γ′(t,s) = tr[σ2z(t) σ2z(s) ρ_B(t)]` with `ρ_B(t)` from the exact chain
/// evolution and operators evolved under `H_B` alone.
pub fn nonstationary_kernel(params: &ChainParams, grid: &TimeGrid) -> Result<CorrelatorKernel> {
    let evo = ChainEvolution::new(params)?;
    Ok(nonstationary_kernel_with(&evo, grid))
}

pub fn nonstationary_kernel_with(evo: &ChainEvolution, grid: &TimeGrid) -> CorrelatorKernel {
    let bath = BathSpectrum::from_thermal(evo.bath().clone());
    bath.two_time_kernel(grid, |m| evo.reduced_bath_eigenbasis(grid.t(m)))
}

/// Single-particle data of the free-fermion antiferromagnet.
#[derive(Clone, Debug)]
pub struct AfmDispersion {
    pub g: f64,
    pub modes: AfmModes,
}

impl AfmDispersion {
    pub fn new(g: f64, modes: AfmModes) -> Result<Self> {
        if !(g.is_finite() && g < 1.0) {
            return Err(Error::domain(format!(
                "analytic correlator needs g < 1 (got {g}); the dispersion degenerates"
            )));
        }
        if let AfmModes::Finite(0) = modes {
            return Err(Error::domain("need at least one mode"));
        }
        Ok(Self { g, modes })
    }

    /// `Γ_k = 2 sqrt((1-g)² + 1 + 2(1-g) cos k)`.
    pub fn energy(&self, k: f64) -> f64 {
        let a = 1.0 - self.g;
        2.0 * (a * a + 1.0 + 2.0 * a * k.cos()).max(0.0).sqrt()
    }

    /// `(k_n, ψ_k)` for `n = 1..N-1`; the `n = N` mode has `sin k = 0` and
    /// carries no weight.
    pub fn modes(n: usize) -> Vec<(f64, f64)> {
        let norm = (2.0 / n as f64).sqrt();
        (1..n)
            .map(|i| {
                let k = i as f64 * PI / n as f64;
                (k, norm * k.sin())
            })
            .collect()
    }

    /// `4 Σ_k ψ_k²/Γ_k² exp(-iΓ_k τ)`, or its continuum limit
    /// `(8/π) ∫_0^π sin²k/Γ_k² exp(-iΓ_k τ) dk`.
    pub fn correlator(&self, tau: f64) -> Result<C64> {
        match self.modes {
            AfmModes::Finite(n) => Ok(Self::modes(n)
                .into_iter()
                .map(|(k, psi)| {
                    let e = self.energy(k);
                    C64::from_polar(4.0 * psi * psi / (e * e), -e * tau)
                })
                .sum()),
            AfmModes::Continuum => {
                let weight = |k: f64| {
                    let e = self.energy(k);
                    let s = k.sin();
                    (8.0 / PI) * s * s / (e * e)
                };
                let re = quadrature::integrate(|k| weight(k) * (self.energy(k) * tau).cos(), 0.0, PI, 1e-9, 1e-15)?;
                let im = quadrature::integrate(|k| -weight(k) * (self.energy(k) * tau).sin(), 0.0, PI, 1e-9, 1e-15)?;
                Ok(C64::new(re, im))
            }
        }
    }
}

/// Stationary kernel from the closed-form antiferromagnetic correlator.
/// Values are returned unnormalised; for finite `N`, `Γ(0) < 1`.
pub fn analytic_afm_kernel(g: f64, modes: AfmModes, grid: &TimeGrid) -> Result<CorrelatorKernel> {
    let disp = AfmDispersion::new(g, modes)?;
    let values = (0..grid.len())
        .into_par_iter()
        .map(|n| disp.correlator(grid.t(n)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrelatorKernel::stationary(*grid, values))
}

/// Kernel selected by `params`; `evo` is reused for the non-stationary mode
/// when given.
pub fn build_kernel(params: &ChainParams, grid: &TimeGrid, evo: Option<&ChainEvolution>) -> Result<CorrelatorKernel> {
    params.validate()?;
    match (params.correlator_mode, params.bath_mode) {
        (CorrelatorMode::AnalyticAfm, _) => analytic_afm_kernel(params.g, params.afm_modes, grid),
        (CorrelatorMode::Numeric, BathMode::Stationary) => stationary_kernel(params, grid),
        (CorrelatorMode::Numeric, BathMode::Nonstationary) => match evo {
            Some(evo) => Ok(nonstationary_kernel_with(evo, grid)),
            None => nonstationary_kernel(params, grid),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ModelSign;
    use crate::spinchain::Pauli;
    use crate::spinchain::site_operator;

    fn small(n: usize) -> ChainParams {
        ChainParams::default().with_n(n).with_grid(0.05, 2.0)
    }

    /// `exp(A)` by Taylor series with scaling and squaring.
    fn expm_series(a: &DenseOperator) -> DenseOperator {
        let squarings = 10;
        let scaled = a.scale_real(1.0 / f64::from(1u32 << squarings));
        let mut term = DenseOperator::identity(a.dim());
        let mut sum = term.clone();
        for k in 1..30 {
            term = (&term * &scaled).scale_real(1.0 / k as f64);
            sum = &sum + &term;
        }
        for _ in 0..squarings {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn heisenberg_trivial_cases() {
        let z = Pauli::Z.matrix();
        let x = Pauli::X.matrix();
        assert_eq!(heisenberg_operator(&x, &z, 0.0).unwrap(), x);
        let out = heisenberg_operator(&z, &z.scale_real(0.7), 3.1).unwrap();
        assert!(out.max_abs_diff(&z) < 1e-14);
    }

    #[test]
    fn heisenberg_matches_series_oracle() {
        let z = Pauli::Z.matrix();
        let ha = Pauli::X.matrix().scale_real(-0.9);
        let t = 1.0;
        let u = expm_series(&ha.scale(C64::new(0.0, -t)));
        let expected = &(&u.dagger() * &z) * &u;
        let got = heisenberg_operator(&z, &ha, t).unwrap();
        assert!(got.max_abs_diff(&expected) < 1e-12);
        // Rotation about x by 2ht: cos(2ht) σz + sin(2ht) σy up to sign.
        let angle = 2.0 * 0.9 * t;
        assert!((got.get(0, 0).re - angle.cos()).abs() < 1e-12);
    }

    #[test]
    fn stationary_kernel_starts_at_one_and_is_bounded() {
        let p = small(6);
        let k = stationary_kernel(&p, &p.grid().unwrap()).unwrap();
        assert!((k.at(0, 0).unwrap() - ONE).norm() < 1e-12);
        k.check_invariants(KERNEL_TOL).unwrap();
        assert_eq!(k.at(3, 5).unwrap(), k.at(5, 3).unwrap().conj());
    }

    #[test]
    fn single_bath_spin_infinite_temperature_closed_form() {
        // H_B = -h σx - g σz, ρ = I/2: σz precesses about the field axis,
        // so Γ(τ) = cos²θ + sin²θ cos(2ωτ) with ω = sqrt(h² + g²), cos θ = g/ω.
        let (h, g) = (0.9f64, 0.4f64);
        let p = ChainParams::default().with_n(2).with_beta(0.0).with_grid(0.1, 3.0);
        let kernel = stationary_kernel(&p, &p.grid().unwrap()).unwrap();
        let omega = (h * h + g * g).sqrt();
        let c2 = (g / omega).powi(2);
        for n in 0..kernel.len() {
            let tau = p.grid().unwrap().t(n);
            let expected = C64::new(c2 + (1.0 - c2) * (2.0 * omega * tau).cos(), 0.0);
            assert!((kernel.at(n, 0).unwrap() - expected).norm() < 1e-10, "tau = {tau}");
        }
    }

    #[test]
    fn thermal_two_time_kernel_is_stationary() {
        let p = small(6);
        let grid = p.grid().unwrap();
        let bath = BathSpectrum::new(&p).unwrap();
        let rho = Mat::from_fn(bath.dim(), bath.dim(), |i, j| {
            if i == j {
                C64::new(bath.thermal.populations[i], 0.0)
            } else {
                ZERO
            }
        });
        let two = bath.two_time_kernel(&grid, |_| rho.clone());
        let one = stationary_kernel(&p, &grid).unwrap();
        assert!(two.max_abs_diff(&one).unwrap() < 1e-8);
    }

    #[test]
    fn correlator_matches_dense_heisenberg_evaluation() {
        let p = small(4).with_beta(0.7);
        let hb = crate::spinchain::decompose(&p).unwrap().bath;
        let z = site_operator(Pauli::Z, 1, p.n - 1).unwrap();
        let rho = crate::exact::thermal_state(&hb, p.beta).unwrap();
        let bath = BathSpectrum::new(&p).unwrap();
        for tau in [0.0, 0.3, 1.7] {
            let zt = heisenberg_operator(&z, &hb, tau).unwrap();
            let expected = (&(&zt * &z) * &rho).trace();
            assert!((bath.thermal_correlator(tau) - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn nonstationary_equals_stationary_without_coupling() {
        let mut p = small(5);
        p.j = 0.0;
        p.dt = Some(0.05);
        p.t_max = Some(1.0);
        let grid = p.grid().unwrap();
        let ns = nonstationary_kernel(&p, &grid).unwrap();
        let st = stationary_kernel(&p, &grid).unwrap();
        assert!(ns.max_abs_diff(&st).unwrap() < 1e-10);
    }

    #[test]
    fn nonstationary_kernel_invariants() {
        let p = small(5);
        let grid = p.grid().unwrap();
        let k = nonstationary_kernel(&p, &grid).unwrap();
        assert!(!k.is_stationary());
        k.check_invariants(KERNEL_TOL).unwrap();
    }

    #[test]
    fn nonstationary_kernel_matches_dense_trace() {
        let p = small(4);
        let grid = TimeGrid::new(0.2, 4).unwrap();
        let k = nonstationary_kernel(&p, &grid).unwrap();
        let evo = ChainEvolution::new(&p).unwrap();
        let hb = crate::spinchain::decompose(&p).unwrap().bath;
        let z = site_operator(Pauli::Z, 1, p.n - 1).unwrap();
        for m in 0..grid.len() {
            let rb = crate::spinchain::partial_trace(
                &evo.full_state(grid.t(m)),
                (2, 1 << (p.n - 1)),
                crate::spinchain::Keep::B,
            )
            .unwrap();
            let zt = heisenberg_operator(&z, &hb, grid.t(m)).unwrap();
            for s in 0..=m {
                let zs = heisenberg_operator(&z, &hb, grid.t(s)).unwrap();
                let expected = (&(&zt * &zs) * &rb).trace();
                assert!((k.at(m, s).unwrap() - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn crank_nicolson_converges_quadratically() {
        let mut p = small(5);
        p.propagation = Propagation::CrankNicolson;
        let coarse = TimeGrid::new(0.04, 50).unwrap();
        let fine = coarse.refined();
        let exact = |g: &TimeGrid| {
            let mut q = p.clone();
            q.propagation = Propagation::Eigen;
            stationary_kernel(&q, g).unwrap()
        };
        let err = |g: &TimeGrid| {
            let cn = stationary_kernel(&p, g).unwrap();
            let ex = exact(g);
            (0..g.len())
                .step_by(g.n_steps() / coarse.n_steps())
                .map(|n| (cn.at(n, 0).unwrap() - ex.at(n, 0).unwrap()).norm())
                .fold(0.0, f64::max)
        };
        let ratio = err(&coarse) / err(&fine);
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn afm_dispersion_at_zero_g() {
        let d = AfmDispersion::new(0.0, AfmModes::Continuum).unwrap();
        for k in [0.1, 0.7, 1.5, 2.9] {
            assert!((d.energy(k) - 4.0 * (k / 2.0).cos().abs()).abs() < 1e-13);
        }
    }

    #[test]
    fn afm_domain_errors() {
        assert!(matches!(AfmDispersion::new(1.0, AfmModes::Continuum), Err(Error::Domain(_))));
        assert!(AfmDispersion::new(0.99, AfmModes::Finite(8)).is_ok());
    }

    #[test]
    fn afm_value_at_zero_is_positive_real() {
        let d = AfmDispersion::new(0.1, AfmModes::Finite(8)).unwrap();
        let v = d.correlator(0.0).unwrap();
        assert!(v.re > 0.0 && v.im == 0.0);
        let c = AfmDispersion::new(0.1, AfmModes::Continuum).unwrap();
        let v = c.correlator(0.0).unwrap();
        assert!((v - ONE).norm() < 1e-9, "continuum Γ(0) = {v}");
    }

    #[test]
    fn afm_finite_approaches_continuum() {
        // The mode sum is a trapezoid rule for a smooth periodic integrand, so
        // the error reaches roundoff quickly; below that floor only
        // non-increase is meaningful.
        let floor = 1e-13;
        let cont = AfmDispersion::new(0.1, AfmModes::Continuum).unwrap();
        for tau in [0.0, 1.0, 2.5, 5.0] {
            let c = cont.correlator(tau).unwrap();
            let errs: Vec<f64> = [16, 64, 256]
                .iter()
                .map(|&n| {
                    let d = AfmDispersion::new(0.1, AfmModes::Finite(n)).unwrap();
                    (d.correlator(tau).unwrap() - c).norm()
                })
                .collect();
            for w in errs.windows(2) {
                assert!(w[1] < w[0] || w[1].max(w[0]) < floor, "{errs:?} at {tau}");
            }
        }
    }

    #[test]
    fn kernel_csv_layout() {
        let grid = TimeGrid::new(0.5, 2).unwrap();
        let k = CorrelatorKernel::stationary(grid, vec![ONE, C64::new(0.5, -0.25), ZERO]);
        let mut buf = Vec::new();
        k.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,s_or_tau,re_gamma,im_gamma");
        assert_eq!(lines[2], "5.00000000000e-1,5.00000000000e-1,5.00000000000e-1,-2.50000000000e-1");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn antiferro_bath_differs_from_ferro() {
        let grid = TimeGrid::new(0.1, 10).unwrap();
        let f = stationary_kernel(&small(5), &grid).unwrap();
        let a = stationary_kernel(&small(5).with_model(ModelSign::Antiferro), &grid).unwrap();
        assert!(f.max_abs_diff(&a).unwrap() > 1e-3);
    }
}
