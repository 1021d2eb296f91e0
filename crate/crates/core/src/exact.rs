//! Closed-system evolution of the full chain: thermal states, the quenched
//! initial state, unitary propagation, Renyi-2 entropy, the exact averaged
//! OTOC and a Monte Carlo Haar-average estimator of the same quantity.

use faer::Mat;
use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::operator::{real_symmetric_eigh, spectral_function, DenseOperator, C64, ONE, ZERO};
use crate::params::ChainParams;
use crate::spinchain::{chain_matrix, Keep};

/// Gibbs populations in an eigenbasis, ground-state shifted for stability.
pub(crate) fn boltzmann_weights(energies: &[f64], beta: f64) -> Vec<f64> {
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = energies.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= z);
    w
}

/// `exp(-βH) / tr exp(-βH)` via the eigendecomposition of `H`.
pub fn thermal_state(h: &DenseOperator, beta: f64) -> Result<DenseOperator> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::domain(format!("inverse temperature {beta} must be nonnegative")));
    }
    let eig = h.eigh()?;
    let w = boltzmann_weights(&eig.values, beta);
    let d = h.dim();
    let v = &eig.vectors;
    let weighted = Mat::from_fn(d, d, |i, k| v[(i, k)] * w[k]);
    Ok(DenseOperator::from_mat(&weighted * v.adjoint()))
}

/// Thermal state of the bath chain (sites 2..N) kept in its eigenbasis.
#[derive(Clone, Debug)]
pub struct BathThermal {
    pub energies: Vec<f64>,
    pub vectors: Mat<f64>,
    pub populations: Vec<f64>,
}

impl BathThermal {
    pub fn new(params: &ChainParams) -> Result<Self> {
        let hb = chain_matrix(params.n - 1, params.model, params.j, params.h, params.g);
        let (energies, vectors) = real_symmetric_eigh(&hb)?;
        let populations = boltzmann_weights(&energies, params.beta);
        Ok(Self {
            energies,
            vectors,
            populations,
        })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn density_matrix(&self) -> DenseOperator {
        let d = self.dim();
        let w = &self.vectors;
        let p = &self.populations;
        DenseOperator::from_real_fn(d, |i, j| (0..d).map(|m| w[(i, m)] * p[m] * w[(j, m)]).sum())
    }
}

/// `σx|0⟩⟨0|σx ⊗ ρ_B^β = |1⟩⟨1| ⊗ ρ_B^β`.
pub fn initial_state(params: &ChainParams) -> Result<DenseOperator> {
    params.validate()?;
    let bath = BathThermal::new(params)?;
    let flipped = DenseOperator::real_diagonal(&[0.0, 1.0]);
    Ok(flipped.kron(&bath.density_matrix()))
}

/// `ρ(t_n) = U(t_n) ρ0 U(t_n)†`, one eigendecomposition for the whole grid.
/// Stores every state, so intended for small dimensions.
pub fn propagate(rho0: &DenseOperator, h: &DenseOperator, grid: &TimeGrid) -> Result<Vec<DenseOperator>> {
    if rho0.dim() != h.dim() {
        return Err(Error::domain("state and Hamiltonian dimensions differ"));
    }
    let eig = h.eigh()?;
    let v = DenseOperator::from_mat(eig.vectors.clone());
    let rho_eig = &(&v.dagger() * rho0) * &v;
    let d = h.dim();
    Ok(grid
        .points()
        .into_iter()
        .map(|t| {
            let u: Vec<C64> = eig.values.iter().map(|&e| C64::from_polar(1.0, -e * t)).collect();
            let rotated = DenseOperator::from_fn(d, |j, k| u[j] * rho_eig.get(j, k) * u[k].conj());
            &(&v * &rotated) * &v.dagger()
        })
        .collect())
}

/// Upper tolerance on purity before it counts as an invariant violation.
const PURITY_SLACK: f64 = 1e-10;

/// `-ln tr[ρ²]`.
pub fn renyi2_entropy(rho: &DenseOperator) -> Result<f64> {
    let purity = rho.purity();
    if !(0.0..=1.0 + PURITY_SLACK).contains(&purity) {
        return Err(Error::numerical(format!("purity {purity} outside [0, 1]")));
    }
    Ok(-purity.clamp(1e-300, 1.0).ln())
}

#[derive(Clone, Debug, Serialize)]
pub struct OtocSeries {
    pub grid: TimeGrid,
    pub otoc: Vec<f64>,
    pub renyi2: Vec<f64>,
}

impl OtocSeries {
    pub fn from_otoc(grid: TimeGrid, otoc: Vec<f64>) -> Self {
        let renyi2 = otoc.iter().map(|&o| -o.clamp(1e-300, 1.0).ln()).collect();
        Self { grid, otoc, renyi2 }
    }
}

/// Exact evolution of the quenched chain, kept in the eigenbasis of `H`.
///
/// With `V` the eigenvectors of `H` and `C = Vᵀ (|1⟩ ⊗ W)` the bath
/// eigenstates expressed in that basis, the evolved state is
/// `ρ(t) = V u C diag(p) Cᵀ ū Vᵀ` where `u = exp(-iEt)`.
pub struct ChainEvolution {
    energies: Vec<f64>,
    vectors: Mat<f64>,
    coeffs: Mat<f64>,
    bath: BathThermal,
    /// `(ρ̃0 ∘ V_aᵀ V_a')` for `(a, a') = (0,0), (1,1), (0,1)`.
    reduced_kernels: [Mat<f64>; 3],
}

impl ChainEvolution {
    pub fn new(params: &ChainParams) -> Result<Self> {
        params.validate()?;
        let h = chain_matrix(params.n, params.model, params.j, params.h, params.g);
        let (energies, vectors) = real_symmetric_eigh(&h)?;
        let bath = BathThermal::new(params)?;
        let db = bath.dim();
        let upper = vectors.as_ref().subrows(0, db);
        let lower = vectors.as_ref().subrows(db, db);
        let coeffs: Mat<f64> = lower.transpose() * &bath.vectors;
        let d = energies.len();
        let weighted = Mat::from_fn(d, db, |j, m| coeffs[(j, m)] * bath.populations[m]);
        let rho_eig: Mat<f64> = &weighted * coeffs.transpose();
        let hadamard = |overlap: Mat<f64>| Mat::from_fn(d, d, |j, k| rho_eig[(j, k)] * overlap[(j, k)]);
        let reduced_kernels = [
            hadamard(upper.transpose() * upper),
            hadamard(lower.transpose() * lower),
            hadamard(upper.transpose() * lower),
        ];
        Ok(Self {
            energies,
            vectors,
            coeffs,
            bath,
            reduced_kernels,
        })
    }

    pub fn bath(&self) -> &BathThermal {
        &self.bath
    }

    fn phases(&self, t: f64) -> Vec<C64> {
        self.energies.iter().map(|&e| C64::from_polar(1.0, -e * t)).collect()
    }

    /// `uᵀ K ū` for a real kernel `K`.
    fn sandwich(kernel: &Mat<f64>, u: &[C64]) -> C64 {
        let d = u.len();
        let mut acc = ZERO;
        for k in 0..d {
            let col = kernel.col(k);
            let mut s = ZERO;
            for j in 0..d {
                s += u[j] * col[j];
            }
            acc += s * u[k].conj();
        }
        acc
    }

    /// Reduced state of site 1 at time `t`.
    pub fn reduced_system(&self, t: f64) -> DenseOperator {
        let u = self.phases(t);
        let r00 = Self::sandwich(&self.reduced_kernels[0], &u);
        let r11 = Self::sandwich(&self.reduced_kernels[1], &u);
        let r01 = Self::sandwich(&self.reduced_kernels[2], &u);
        DenseOperator::from_fn(2, |a, b| match (a, b) {
            (0, 0) => C64::new(r00.re, 0.0),
            (1, 1) => C64::new(r11.re, 0.0),
            (0, 1) => r01,
            _ => r01.conj(),
        })
    }

    /// Full state at time `t`; dimension `2^N`, intended for small chains.
    pub fn full_state(&self, t: f64) -> DenseOperator {
        let u = self.phases(t);
        let d = self.energies.len();
        let psi = self.evolved_bath_columns(&u, 0, d);
        let p = &self.bath.populations;
        DenseOperator::from_fn(d, |r, c| {
            (0..p.len()).map(|m| psi[(r, m)] * p[m] * psi[(c, m)].conj()).sum()
        })
    }

    /// Rows `[start, start + len)` of `Ψ(t) = V u C`, the evolved images of
    /// `|1⟩ ⊗ φ_m`.
    fn evolved_bath_columns(&self, u: &[C64], start: usize, len: usize) -> Mat<C64> {
        let rows = self.vectors.as_ref().subrows(start, len);
        let db = self.bath.dim();
        let d = u.len();
        let re = Mat::from_fn(d, db, |j, m| u[j].re * self.coeffs[(j, m)]);
        let im = Mat::from_fn(d, db, |j, m| u[j].im * self.coeffs[(j, m)]);
        let pr: Mat<f64> = rows * &re;
        let pi: Mat<f64> = rows * &im;
        Mat::from_fn(len, db, |r, m| C64::new(pr[(r, m)], pi[(r, m)]))
    }

    /// Reduced bath state `tr_A ρ(t)` expressed in the eigenbasis of `H_B`.
    pub fn reduced_bath_eigenbasis(&self, t: f64) -> Mat<C64> {
        let u = self.phases(t);
        let db = self.bath.dim();
        let p = &self.bath.populations;
        let w = &self.bath.vectors;
        let mut acc = Mat::<C64>::zeros(db, db);
        for a in 0..2 {
            let psi = self.evolved_bath_columns(&u, a * db, db);
            let wt = Mat::from_fn(db, db, |i, j| C64::new(w[(j, i)], 0.0));
            let x: Mat<C64> = &wt * &psi;
            let xp = Mat::from_fn(db, db, |i, m| x[(i, m)] * p[m]);
            acc += &xp * x.adjoint();
        }
        acc
    }
}

/// `Ō(t_n) = exp(-S_A^(2)(t_n)) = tr[ρ_A(t_n)²]` on the grid.
pub fn exact_average_otoc(params: &ChainParams, grid: &TimeGrid) -> Result<OtocSeries> {
    let evo = ChainEvolution::new(params)?;
    exact_average_otoc_with(&evo, grid)
}

pub fn exact_average_otoc_with(evo: &ChainEvolution, grid: &TimeGrid) -> Result<OtocSeries> {
    let mut otoc = Vec::with_capacity(grid.len());
    let mut renyi2 = Vec::with_capacity(grid.len());
    for t in grid.points() {
        let rho_a = evo.reduced_system(t);
        let s2 = renyi2_entropy(&rho_a)?;
        renyi2.push(s2);
        otoc.push((-s2).exp());
    }
    Ok(OtocSeries {
        grid: *grid,
        otoc,
        renyi2,
    })
}

/// Haar-random unitary from the QR decomposition of a complex Ginibre
/// matrix with the diagonal of `R` rotated to be positive.
pub fn haar_unitary(dim: usize, rng: &mut impl rand::Rng) -> DenseOperator {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let ginibre = Mat::<C64>::from_fn(dim, dim, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * scale, im * scale)
    });
    let qr = ginibre.qr();
    let q = qr.compute_Q();
    let r = qr.R();
    let phases: Vec<C64> = (0..dim)
        .map(|i| {
            let d = r[(i, i)];
            if d.norm() > 0.0 {
                d / d.norm()
            } else {
                ONE
            }
        })
        .collect();
    DenseOperator::from_fn(dim, |i, j| q[(i, j)] * phases[j])
}

/// Sample mean and standard error of a Monte Carlo estimate.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct HaarEstimate {
    pub t: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub imag_mean: f64,
    pub imag_stderr: f64,
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// RNG for Haar sample `index`; independent of scheduling.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Monte Carlo estimate of `∫dB tr[B†(t) A† B(t) A]` with `A = ρ(0)` and `B`
/// Haar-distributed on sites 2..N, evaluated at each of `times` with the same
/// draws. Each trace is multiplied by `d_B` so that the estimator targets
/// `tr[ρ_A(t)²]`.
pub fn haar_average_otoc_mc_series(
    params: &ChainParams,
    times: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<HaarEstimate>> {
    if n_samples < 2 {
        return Err(Error::domain("need at least two Haar samples"));
    }
    params.validate()?;
    let h = DenseOperator::from_real_mat(&chain_matrix(params.n, params.model, params.j, params.h, params.g));
    let eig = h.eigh()?;
    let a = initial_state(params)?;
    let a_dag = a.dagger();
    let db = params.bath_dim();
    let propagators: Vec<DenseOperator> = times
        .iter()
        .map(|&t| spectral_function(&eig, |e| C64::from_polar(1.0, -e * t)))
        .collect();
    let id_a = DenseOperator::identity(2);

    let samples: Vec<Vec<C64>> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = sample_rng(seed, k as u64);
            let b = id_a.kron(&haar_unitary(db, &mut rng));
            propagators
                .iter()
                .map(|u| {
                    let bt = &(&u.dagger() * &b) * u;
                    let prod = &(&(&bt.dagger() * &a_dag) * &bt) * &a;
                    prod.trace() * db as f64
                })
                .collect()
        })
        .collect();

    let out = times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let re: Vec<f64> = samples.iter().map(|s| s[i].re).collect();
            let im: Vec<f64> = samples.iter().map(|s| s[i].im).collect();
            let (estimate, stderr) = mean_and_stderr(&re);
            let (imag_mean, imag_stderr) = mean_and_stderr(&im);
            if imag_mean.abs() > 3.0 * imag_stderr && imag_stderr > 0.0 {
                warn!("Haar estimate at t={t}: imaginary mean {imag_mean:e} exceeds 3 stderr");
            }
            HaarEstimate {
                t,
                estimate,
                stderr,
                imag_mean,
                imag_stderr,
            }
        })
        .collect();
    Ok(out)
}

pub fn haar_average_otoc_mc(params: &ChainParams, t: f64, n_samples: usize, seed: u64) -> Result<(f64, f64)> {
    let est = haar_average_otoc_mc_series(params, &[t], n_samples, seed)?;
    Ok((est[0].estimate, est[0].stderr))
}

/// Reduced state of site 1 from a full-chain density matrix.
pub fn reduce_to_system(rho: &DenseOperator) -> Result<DenseOperator> {
    crate::spinchain::partial_trace(rho, (2, rho.dim() / 2), Keep::A)
}
