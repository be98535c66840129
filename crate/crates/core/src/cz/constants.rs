//! Measured constants of the projection step, in floating point.

use serde::Serialize;

use super::decompose::CzDecomposition;
use super::projection::{l1_defect, local_grid, sup_ratio, PolyPiece, PolynomialBasis, StepPiece};
use crate::scalar::Scalar;

#[derive(Clone, Debug, Default, Serialize)]
pub struct ProjectionConstants {
    /// `max sup_q |Π_q h| / avg_q |h|` over pieces.
    pub sup_ratio: f64,
    /// `max_q sup_{x∈q} Σ_{n,ν} |Π_q f^{n,ν}_q(x)| / α`.
    pub sum_sup_over_alpha: f64,
    /// `max_q Σ_{n,ν} ‖b^{n,ν}_q‖₁ / Σ_{n,ν} ‖f^{n,ν}_q‖₁`; the denominator
    /// is at most `∫_q |f|`.
    pub bad_l1_ratio: f64,
    pub pieces: usize,
}

fn to_f64_piece<T: Scalar>(p: &PolyPiece<T>) -> PolyPiece<f64> {
    PolyPiece {
        q: p.q.clone(),
        coeffs: p.coeffs.iter().map(Scalar::to_f64_lossy).collect(),
    }
}

fn to_f64_step<T: Scalar>(h: &StepPiece<T>) -> StepPiece<f64> {
    StepPiece {
        q: h.q.clone(),
        cells: h.cells.iter().map(|(v, c)| (v.to_f64_lossy(), c.clone())).collect(),
    }
}

/// Evaluate the three measured constants on a decomposition.
pub fn projection_constants<T: Scalar>(cz: &CzDecomposition<T>) -> ProjectionConstants {
    let dim = cz.basis.dim();
    let basis = PolynomialBasis::<f64>::new(dim, cz.basis.degree_cap()).expect("same table as the decomposition");
    let alpha = cz.alpha.to_f64_lossy();
    let grid = local_grid(dim, 8 * basis.degree_cap().max(1));
    let mut out = ProjectionConstants {
        pieces: cz.pieces.len(),
        ..Default::default()
    };
    for idx in cz.pieces_by_cube() {
        if idx.is_empty() {
            continue;
        }
        let polys: Vec<PolyPiece<f64>> = idx.iter().map(|&i| to_f64_piece(&cz.pieces[i].projection)).collect();
        let steps: Vec<StepPiece<f64>> = idx.iter().map(|&i| to_f64_step(&cz.pieces[i].step())).collect();
        for (h, p) in steps.iter().zip(&polys) {
            out.sup_ratio = out.sup_ratio.max(sup_ratio(h, p, &basis));
        }
        let sum_sup = grid
            .iter()
            .map(|u| polys.iter().map(|p| p.eval_local(&basis, u).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        out.sum_sup_over_alpha = out.sum_sup_over_alpha.max(sum_sup / alpha);
        let q = &cz.pieces[idx[0]].q;
        // ‖b‖₁ / |q| summed, against ∫_q |f| / |q|
        let bad: f64 = steps.iter().zip(&polys).map(|(h, p)| l1_defect(h, p, &basis)).sum();
        let mass: f64 = steps
            .iter()
            .flat_map(|h| h.cells.iter())
            .map(|(v, c)| v.abs() * c.measure().to_f64())
            .sum::<f64>()
            / q.measure().to_f64();
        if mass > 0.0 {
            out.bad_l1_ratio = out.bad_l1_ratio.max(bad / mass);
        }
    }
    out
}
