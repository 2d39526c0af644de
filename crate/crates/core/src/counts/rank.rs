use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::error::{invalid, Error, Result};
use crate::grid::{Partition, RealMatrix};
use crate::par::map_indices;
use crate::rng::seeded;

use super::pcr::{predict_dmatrix, PcrBasis};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankPoint {
    pub k: usize,
    pub loss: f64,
}

/// Validation loss as a function of rank.
#[derive(Debug, Clone, PartialEq)]
pub struct RankCurve {
    pub points: Vec<RankPoint>,
}

impl RankCurve {
    /// Rank with the lowest loss; ties go to the smaller rank.
    pub fn argmin(&self) -> Option<usize> {
        let losses: Vec<f64> = self.points.iter().map(|p| p.loss).collect();
        let mut best: Option<usize> = None;
        for (i, p) in self.points.iter().enumerate() {
            match best {
                Some(b)
                    if !(losses[i] < losses[b]
                        || (losses[i] == losses[b] && p.k < self.points[b].k)) => {}
                _ if losses[i].is_nan() => {}
                _ => best = Some(i),
            }
        }
        best.map(|i| self.points[i].k)
    }

    pub fn losses(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.loss).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        out.write_record(["k", "loss"]).map_err(io)?;
        for p in &self.points {
            out.write_record([p.k.to_string(), p.loss.to_string()])
                .map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers().map_err(|e| Error::Parse {
            line: 1,
            column: 1,
            message: e.to_string(),
        })?;
        if header.iter().collect::<Vec<_>>() != ["k", "loss"] {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: "expected header k,loss".into(),
            });
        }
        let mut points = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Parse {
                line,
                column: 1,
                message: e.to_string(),
            })?;
            let field = |c: usize| rec.get(c).unwrap_or("");
            let k = field(0).parse().map_err(|_| Error::Parse {
                line,
                column: 1,
                message: "bad rank".into(),
            })?;
            let loss = field(1).parse().map_err(|_| Error::Parse {
                line,
                column: 2,
                message: "bad loss".into(),
            })?;
            points.push(RankPoint { k, loss });
        }
        Ok(Self { points })
    }
}

fn mse(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm_squared() / a.len() as f64
}

fn check_ranks(ks: &[usize]) -> Result<()> {
    if ks.is_empty() {
        return invalid("rank list is empty");
    }
    if ks.contains(&0) {
        return invalid("ranks must be >= 1");
    }
    Ok(())
}

/// Self-supervised rank curve for two independent halves of the same data.
///
/// In each direction the rank-`k` principal component reconstruction of one
/// half is scored against the other half; the per-entry losses of both
/// directions are summed. The reconstruction uses only its own half, so with
/// independent halves the loss is the reconstruction error against the
/// shared signal plus the noise variance of the other half.
pub fn self_supervised_rank_curve(
    x1: &RealMatrix,
    x2: &RealMatrix,
    ks: &[usize],
) -> Result<RankCurve> {
    check_ranks(ks)?;
    if (x1.rows(), x1.cols()) != (x2.rows(), x2.cols()) {
        return invalid("halves differ in shape");
    }
    let (a, b) = (x1.to_dmatrix(), x2.to_dmatrix());
    let mut losses = vec![0.0; ks.len()];
    for (src, tgt) in [(&a, &b), (&b, &a)] {
        let basis = PcrBasis::new(src, src)?;
        for (i, &k) in ks.iter().enumerate() {
            let pred = predict_dmatrix(&basis.model(k)?, src)?;
            losses[i] += mse(&pred, tgt);
        }
    }
    Ok(RankCurve {
        points: ks
            .iter()
            .zip(losses)
            .map(|(&k, loss)| RankPoint { k, loss })
            .collect(),
    })
}

/// Bi-cross-validation. Rows are shuffled and dealt into `row_folds` folds.
/// Each fold in turn is held out; on the remaining rows a rank-`k` PCR maps
/// one column block to the other, and its per-entry error on the held-out
/// rows is recorded. Both column directions are summed and folds averaged.
pub fn bicv(
    x: &RealMatrix,
    ks: &[usize],
    row_folds: usize,
    col_split: &Partition,
    seed: u64,
) -> Result<RankCurve> {
    check_ranks(ks)?;
    if row_folds < 2 || row_folds > x.rows() {
        return invalid(format!(
            "row_folds must be in 2..={}, got {row_folds}",
            x.rows()
        ));
    }
    if col_split.m() != x.cols() || col_split.len() != 2 {
        return invalid("column split must partition the columns into two blocks");
    }
    let blocks = [
        col_split.subsets()[0].clone(),
        col_split.subsets()[1].clone(),
    ];
    let mut order: Vec<usize> = (0..x.rows()).collect();
    order.shuffle(&mut seeded(seed, 0x6263_7631));
    let folds: Vec<Vec<usize>> = (0..row_folds)
        .map(|f| order.iter().skip(f).step_by(row_folds).copied().collect())
        .collect();
    let kmax = *ks.iter().max().expect("nonempty");
    for f in 0..row_folds {
        let train = x.rows() - folds[f].len();
        let narrow = blocks.iter().map(Vec::len).min().expect("two blocks");
        if kmax > train.min(narrow) {
            return invalid(format!(
                "rank {kmax} exceeds the {train} training rows or {narrow} block columns of fold {f}"
            ));
        }
    }

    let per_fold = map_indices(row_folds, |f| -> Result<Vec<f64>> {
        let valid = &folds[f];
        let train: Vec<usize> = (0..row_folds)
            .filter(|&g| g != f)
            .flat_map(|g| folds[g].iter().copied())
            .collect();
        let mut losses = vec![0.0; ks.len()];
        for (src, tgt) in [(&blocks[0], &blocks[1]), (&blocks[1], &blocks[0])] {
            let basis = PcrBasis::new(
                &x.select(&train, src)?.to_dmatrix(),
                &x.select(&train, tgt)?.to_dmatrix(),
            )?;
            let vs = x.select(valid, src)?.to_dmatrix();
            let vt = x.select(valid, tgt)?.to_dmatrix();
            for (i, &k) in ks.iter().enumerate() {
                losses[i] += mse(&predict_dmatrix(&basis.model(k)?, &vs)?, &vt);
            }
        }
        Ok(losses)
    });
    let mut total = vec![0.0; ks.len()];
    for fold in per_fold {
        for (t, l) in total.iter_mut().zip(fold?) {
            *t += l / row_folds as f64;
        }
    }
    Ok(RankCurve {
        points: ks
            .iter()
            .zip(total)
            .map(|(&k, loss)| RankPoint { k, loss })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counts::simulate_gaussian_lowrank;
    use crate::grid::Partition;

    fn halves(cols: usize) -> Partition {
        Partition::new(
            cols,
            vec![(0..cols / 2).collect(), (cols / 2..cols).collect()],
        )
        .unwrap()
    }

    #[test]
    fn dependent_halves_overfit() {
        let (x, _) = simulate_gaussian_lowrank(60, 30, 3, 0.7, 1.0, 1).unwrap();
        let ks: Vec<usize> = (1..=20).collect();
        let curve = self_supervised_rank_curve(&x, &x, &ks).unwrap();
        assert!(curve.losses().windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert_eq!(curve.argmin(), Some(20));
    }

    #[test]
    fn independent_noise_halves_pick_signal_rank() {
        let (x1, clean) = simulate_gaussian_lowrank(200, 80, 3, 0.7, 1.0, 2).unwrap();
        let (noise, _) = simulate_gaussian_lowrank(200, 80, 1, 0.0, 1.0, 3).unwrap();
        let x2 = RealMatrix::new(
            200,
            80,
            clean
                .values()
                .iter()
                .zip(noise.values())
                .map(|(c, n)| c + n)
                .collect(),
        )
        .unwrap();
        let ks: Vec<usize> = (1..=10).collect();
        let k = self_supervised_rank_curve(&x1, &x2, &ks)
            .unwrap()
            .argmin()
            .unwrap();
        assert!((2..=4).contains(&k), "{k}");
    }

    #[test]
    fn pure_noise_prefers_smallest_rank() {
        let (x1, _) = simulate_gaussian_lowrank(100, 40, 1, 0.0, 1.0, 4).unwrap();
        let (x2, _) = simulate_gaussian_lowrank(100, 40, 1, 0.0, 1.0, 5).unwrap();
        let curve = self_supervised_rank_curve(&x1, &x2, &[1, 2, 3, 5, 8]).unwrap();
        assert_eq!(curve.argmin(), Some(1));
    }

    #[test]
    fn bicv_rank_one() {
        let (x, _) = simulate_gaussian_lowrank(80, 40, 1, 1.0, 1e-3, 6).unwrap();
        let curve = bicv(&x, &[1, 2, 3, 4, 5], 2, &halves(40), 0).unwrap();
        assert_eq!(curve.argmin(), Some(1));
    }

    #[test]
    fn bicv_validation() {
        let (x, _) = simulate_gaussian_lowrank(10, 6, 1, 1.0, 0.1, 6).unwrap();
        assert!(bicv(&x, &[1], 1, &halves(6), 0).is_err());
        assert!(bicv(&x, &[4], 2, &halves(6), 0).is_err());
        assert!(bicv(&x, &[6], 5, &halves(6), 0).is_err());
        assert!(bicv(&x, &[], 2, &halves(6), 0).is_err());
        assert!(bicv(&x, &[1], 2, &halves(8), 0).is_err());
        assert!(bicv(&x, &[1, 2, 3], 2, &halves(6), 0).is_ok());
        assert_eq!(
            bicv(&x, &[1, 2], 3, &halves(6), 9).unwrap(),
            bicv(&x, &[1, 2], 3, &halves(6), 9).unwrap()
        );
    }

    #[test]
    fn curve_csv_round_trip() {
        let c = RankCurve {
            points: vec![
                RankPoint { k: 1, loss: 0.5 },
                RankPoint { k: 2, loss: 0.25 },
            ],
        };
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "k,loss\n1,0.5\n2,0.25\n"
        );
        assert_eq!(RankCurve::read_csv(buf.as_slice()).unwrap(), c);
        assert_eq!(c.argmin(), Some(2));
        assert!(RankCurve::read_csv("k,loss\nx,1\n".as_bytes()).is_err());
    }
}
