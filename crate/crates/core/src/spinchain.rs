//! Pauli operators on the chain, the Ising Hamiltonian and its
//! system/bath/interaction split, and partial traces.
//!
//! Basis states are ordered with site 1 as the most significant qubit and
//! `|0⟩` the `σz = +1` eigenstate, so the single-spin subsystem is the
//! leading tensor factor.

use faer::Mat;

use crate::error::{Error, Result};
use crate::operator::{DenseOperator, C64, I, ONE, ZERO};
use crate::params::{ChainParams, ModelSign};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> DenseOperator {
        let rows: [[C64; 2]; 2] = match self {
            Pauli::X => [[ZERO, ONE], [ONE, ZERO]],
            Pauli::Y => [[ZERO, -I], [I, ZERO]],
            Pauli::Z => [[ONE, ZERO], [ZERO, -ONE]],
        };
        DenseOperator::from_fn(2, |i, j| rows[i][j])
    }
}

/// `I^{⊗(site-1)} ⊗ σ^α ⊗ I^{⊗(n-site)}`, with `site` counted from 1.
pub fn site_operator(alpha: Pauli, site: usize, n: usize) -> Result<DenseOperator> {
    if site == 0 || site > n {
        return Err(Error::domain(format!("site {site} outside 1..={n}")));
    }
    let left = DenseOperator::identity(1 << (site - 1));
    let right = DenseOperator::identity(1 << (n - site));
    Ok(left.kron(&alpha.matrix()).kron(&right))
}

/// Bit of `site` (1-based) in basis index `state` for an `n`-site chain.
fn spin_z(state: usize, site: usize, n: usize) -> f64 {
    if (state >> (n - site)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Open chain of `n` sites, `s J Σ σzσz - h Σ σx - g Σ σz` with `s = -1`
/// for ferro and `+1` for antiferro, as a real matrix.
pub(crate) fn chain_matrix(n: usize, model: ModelSign, j: f64, h: f64, g: f64) -> Mat<f64> {
    let dim = 1usize << n;
    let ising = model.ising_prefactor() * j;
    let mut m = Mat::<f64>::zeros(dim, dim);
    for s in 0..dim {
        let mut diag = 0.0;
        for site in 1..n {
            diag += ising * spin_z(s, site, n) * spin_z(s, site + 1, n);
        }
        for site in 1..=n {
            diag -= g * spin_z(s, site, n);
            let flipped = s ^ (1 << (n - site));
            m[(flipped, s)] -= h;
        }
        m[(s, s)] = diag;
    }
    m
}

pub fn build_chain_hamiltonian(params: &ChainParams) -> DenseOperator {
    DenseOperator::from_real_mat(&chain_matrix(
        params.n,
        params.model,
        params.j,
        params.h,
        params.g,
    ))
}

/// System, bath and interaction pieces of the chain Hamiltonian.
#[derive(Clone, Debug)]
pub struct Decomposition {
    /// `-h σx - g σz` on site 1 (2×2).
    pub system: DenseOperator,
    /// Chain on sites 2..N (dimension `2^(N-1)`).
    pub bath: DenseOperator,
    /// `∓J σ1z σ2z` on the full space.
    pub interaction: DenseOperator,
}

impl Decomposition {
    /// `H_A ⊗ I + I ⊗ H_B + H_I`.
    pub fn recombine(&self) -> DenseOperator {
        let id_b = DenseOperator::identity(self.bath.dim());
        let id_a = DenseOperator::identity(self.system.dim());
        let sum = &self.system.kron(&id_b) + &id_a.kron(&self.bath);
        &sum + &self.interaction
    }
}

pub fn decompose(params: &ChainParams) -> Result<Decomposition> {
    if params.n < 2 {
        return Err(Error::domain("decomposition needs at least two sites"));
    }
    let system = DenseOperator::from_real_mat(&chain_matrix(1, params.model, params.j, params.h, params.g));
    let bath = DenseOperator::from_real_mat(&chain_matrix(
        params.n - 1,
        params.model,
        params.j,
        params.h,
        params.g,
    ));
    let zz = &site_operator(Pauli::Z, 1, params.n)? * &site_operator(Pauli::Z, 2, params.n)?;
    let interaction = zz.scale_real(params.model.ising_prefactor() * params.j);
    Ok(Decomposition {
        system,
        bath,
        interaction,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Keep {
    A,
    B,
}

/// Reduced state of a bipartite operator on `dA ⊗ dB`.
pub fn partial_trace(rho: &DenseOperator, dims: (usize, usize), keep: Keep) -> Result<DenseOperator> {
    let (da, db) = dims;
    if da == 0 || db == 0 || da * db != rho.dim() {
        return Err(Error::domain(format!(
            "dimensions {da}x{db} do not factor an operator of dimension {}",
            rho.dim()
        )));
    }
    let out = match keep {
        Keep::A => DenseOperator::from_fn(da, |a, ap| {
            (0..db).map(|b| rho.get(a * db + b, ap * db + b)).sum()
        }),
        Keep::B => DenseOperator::from_fn(db, |b, bp| {
            (0..da).map(|a| rho.get(a * db + b, a * db + bp)).sum()
        }),
    };
    Ok(out)
}
