use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::grid::RealMatrix;

/// Rank-`k` principal component regression: project the centred source on
/// its top `k` principal directions, then regress the centred target on the
/// scores.
#[derive(Debug, Clone, PartialEq)]
pub struct PcrModel {
    pub k: usize,
    pub source_mean: Vec<f64>,
    /// `k` x source-features, orthonormal rows.
    pub components: RealMatrix,
    /// `k` x target-features.
    pub regression: RealMatrix,
    pub target_mean: Vec<f64>,
}

fn column_means(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows() as f64;
    m.column_iter().map(|c| c.sum() / n).collect()
}

fn centred(m: &DMatrix<f64>, mean: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] - mean[c])
}

/// Sorted, sign-normalized SVD of the centred source, shared by all ranks.
pub(crate) struct PcrBasis {
    source_mean: Vec<f64>,
    target_mean: Vec<f64>,
    /// `u_k^T * target_c` rows, one per direction.
    projected_target: DMatrix<f64>,
    singular: Vec<f64>,
    vt: DMatrix<f64>,
    rows: usize,
}

impl PcrBasis {
    pub(crate) fn new(source: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<Self> {
        if source.nrows() != target.nrows() {
            return invalid(format!(
                "source has {} rows, target {}",
                source.nrows(),
                target.nrows()
            ));
        }
        if source.nrows() == 0 || source.ncols() == 0 || target.ncols() == 0 {
            return invalid("source and target must be nonempty");
        }
        let source_mean = column_means(source);
        let target_mean = column_means(target);
        let sc = centred(source, &source_mean);
        let tc = centred(target, &target_mean);
        let svd = sc.svd(true, true);
        let (u, vt) = match (svd.u, svd.v_t) {
            (Some(u), Some(vt)) => (u, vt),
            _ => return Err(Error::Numeric("singular value decomposition failed".into())),
        };
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

        let p = source.ncols();
        let mut vt_sorted = DMatrix::zeros(order.len(), p);
        let mut u_sorted = DMatrix::zeros(source.nrows(), order.len());
        for (dst, &src) in order.iter().enumerate() {
            let v = vt.row(src);
            let top = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let first = v
                .iter()
                .find(|x| x.abs() > 1e-12 * top)
                .copied()
                .unwrap_or(1.0);
            let sign = if first < 0.0 { -1.0 } else { 1.0 };
            vt_sorted.row_mut(dst).copy_from(&(v * sign));
            u_sorted.column_mut(dst).copy_from(&(u.column(src) * sign));
        }
        let singular: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
        Ok(Self {
            source_mean,
            target_mean,
            projected_target: u_sorted.transpose() * tc,
            singular,
            vt: vt_sorted,
            rows: source.nrows(),
        })
    }

    pub(crate) fn max_rank(&self) -> usize {
        self.singular.len().min(self.rows)
    }

    pub(crate) fn model(&self, k: usize) -> Result<PcrModel> {
        if k == 0 || k > self.max_rank() {
            return invalid(format!("rank {k} must be in 1..={}", self.max_rank()));
        }
        let p = self.vt.ncols();
        let q = self.projected_target.ncols();
        let tol =
            self.singular.first().copied().unwrap_or(0.0) * f64::EPSILON * self.rows.max(p) as f64;
        let mut regression = DMatrix::zeros(k, q);
        for i in 0..k {
            if self.singular[i] > tol {
                regression
                    .row_mut(i)
                    .copy_from(&(self.projected_target.row(i) / self.singular[i]));
            }
        }
        Ok(PcrModel {
            k,
            source_mean: self.source_mean.clone(),
            components: RealMatrix::from_dmatrix(&self.vt.rows(0, k).into_owned())?,
            regression: RealMatrix::from_dmatrix(&regression)?,
            target_mean: self.target_mean.clone(),
        })
    }
}

fn check_k(k: usize, source: &RealMatrix) -> Result<()> {
    let max = source.rows().min(source.cols());
    if k == 0 || k > max {
        return invalid(format!(
            "rank {k} must be in 1..={max} for a {}x{} source",
            source.rows(),
            source.cols()
        ));
    }
    Ok(())
}

pub fn pcr_fit(source: &RealMatrix, target: &RealMatrix, k: usize) -> Result<PcrModel> {
    check_k(k, source)?;
    PcrBasis::new(&source.to_dmatrix(), &target.to_dmatrix())?.model(k)
}

/// Models for several ranks from one decomposition.
pub fn pcr_fit_path(
    source: &RealMatrix,
    target: &RealMatrix,
    ks: &[usize],
) -> Result<Vec<PcrModel>> {
    for &k in ks {
        check_k(k, source)?;
    }
    let basis = PcrBasis::new(&source.to_dmatrix(), &target.to_dmatrix())?;
    ks.iter().map(|&k| basis.model(k)).collect()
}

pub(crate) fn predict_dmatrix(model: &PcrModel, source: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if source.ncols() != model.source_mean.len() {
        return invalid(format!(
            "source has {} columns, model expects {}",
            source.ncols(),
            model.source_mean.len()
        ));
    }
    let scores = centred(source, &model.source_mean) * model.components.to_dmatrix().transpose();
    let mut out = scores * model.regression.to_dmatrix();
    for (c, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(model.target_mean[c]);
    }
    Ok(out)
}

pub fn pcr_predict(model: &PcrModel, source: &RealMatrix) -> Result<RealMatrix> {
    RealMatrix::from_dmatrix(&predict_dmatrix(model, &source.to_dmatrix())?)
}
