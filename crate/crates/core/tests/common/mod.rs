#![allow(dead_code)]

use otoc_qsl::operator::{DenseOperator, C64, ZERO};
use otoc_qsl::params::{ChainParams, ModelSign};
use otoc_qsl::spinchain::{build_chain_hamiltonian, site_operator, Pauli};

/// Ground-state edge autocorrelation `⟨GS|σ1z(t) σ1z(0)|GS⟩` of
/// `(1 - g²) Σ σzσz - Σ σx` on an open chain of `n` sites, by exact
/// diagonalisation.
pub fn edge_correlator_ed(n: usize, g: f64, times: &[f64]) -> Vec<C64> {
    let p = ChainParams::default()
        .with_n(n)
        .with_model(ModelSign::Antiferro)
        .with_couplings(1.0 - g * g, 1.0, 0.0);
    let h = build_chain_hamiltonian(&p);
    let eig = h.eigh().unwrap();
    let z = site_operator(Pauli::Z, 1, n).unwrap();
    let v = DenseOperator::from_mat(eig.vectors.clone());
    let zv = &(&v.dagger() * &z) * &v;
    let e0 = eig.values[0];
    times
        .iter()
        .map(|&t| {
            let mut acc = ZERO;
            for k in 0..h.dim() {
                let w = zv.get(k, 0).norm_sqr();
                acc += C64::from_polar(w, -(eig.values[k] - e0) * t);
            }
            acc
        })
        .collect()
}
