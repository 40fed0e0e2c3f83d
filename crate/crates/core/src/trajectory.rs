//! Sampled trajectories, CSV output and trajectory comparison.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// One accepted step with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub q: f64,
    pub p: f64,
    /// Values in the order of [`Trajectory::moment_labels`].
    pub moments: Vec<f64>,
    pub hq: f64,
    pub uncertainty: f64,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub m: f64,
    /// `(a, n)` of each moment column.
    pub moment_labels: Vec<(usize, usize)>,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Sup,
    L2,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sup" => Ok(Metric::Sup),
            "l2" => Ok(Metric::L2),
            other => Err(Error::Range(format!("unknown metric {other:?} (expected sup or l2)"))),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Sup => "sup",
            Metric::L2 => "l2",
        })
    }
}

impl Trajectory {
    pub fn new(m: f64, moment_labels: Vec<(usize, usize)>) -> Self {
        Self { m, moment_labels, samples: Vec::new() }
    }

    pub fn push(&mut self, sample: Sample) {
        debug_assert!(self.samples.last().is_none_or(|s| s.t != sample.t));
        debug_assert_eq!(sample.moments.len(), self.moment_labels.len());
        self.samples.push(sample);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn moment_index(&self, a: usize, n: usize) -> Option<usize> {
        self.moment_labels.iter().position(|&l| l == (a, n))
    }

    /// Time range covered, ordered low to high.
    pub fn span(&self) -> Option<(f64, f64)> {
        let first = self.samples.first()?.t;
        let last = self.samples.last()?.t;
        Some((first.min(last), first.max(last)))
    }

    /// Samples with `g02 g22 - g12^2 < 1/4 - tol`.
    pub fn uncertainty_violations(&self, tol: f64) -> Vec<&Sample> {
        self.samples.iter().filter(|s| s.uncertainty < 0.25 - tol).collect()
    }

    /// Cubic Hermite interpolation of `q` using `q' = p/m`; `None` outside the
    /// sampled range.
    pub fn q_at(&self, t: f64) -> Option<f64> {
        let (lo, hi) = self.span()?;
        if t < lo || t > hi {
            return None;
        }
        let s = &self.samples;
        if s.len() == 1 {
            return Some(s[0].q);
        }
        let ascending = s[0].t < s[s.len() - 1].t;
        let target = if ascending { t } else { -t };
        // first index with key >= target
        let j = s.partition_point(|x| (if ascending { x.t } else { -x.t }) < target).max(1);
        let i = j - 1;
        let (t0, t1) = (s[i].t, s[j].t);
        let h = t1 - t0;
        let u = (t - t0) / h;
        let (q0, q1) = (s[i].q, s[j].q);
        let (d0, d1) = (s[i].p / self.m * h, s[j].p / self.m * h);
        let u2 = u * u;
        let u3 = u2 * u;
        Some(
            (2.0 * u3 - 3.0 * u2 + 1.0) * q0
                + (u3 - 2.0 * u2 + u) * d0
                + (-2.0 * u3 + 3.0 * u2) * q1
                + (u3 - u2) * d1,
        )
    }

    pub fn header(&self) -> String {
        let mut cols = vec!["t".to_string(), "q".into(), "p".into()];
        cols.extend(self.moment_labels.iter().map(|(a, n)| format!("G_{a}_{n}")));
        cols.extend(["HQ".to_string(), "uncertainty".into(), "X".into()]);
        cols.join(",")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.header())?;
        for s in &self.samples {
            let mut line = format!("{:.16e},{:.16e},{:.16e}", s.t, s.q, s.p);
            for g in &s.moments {
                line.push_str(&format!(",{g:.16e}"));
            }
            line.push_str(&format!(",{:.16e},{:.16e},{:.16e}", s.hq, s.uncertainty, s.x));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Reads a file produced by [`Trajectory::write_csv`].
    pub fn read_csv<R: BufRead>(r: R, m: f64) -> Result<Self> {
        let bad = |msg: String| Error::Range(format!("trajectory CSV: {msg}"));
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| bad("empty file".into()))?
            .map_err(|e| bad(e.to_string()))?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        let k = cols.len();
        if k < 6 || cols[..3] != ["t", "q", "p"] || cols[k - 3..] != ["HQ", "uncertainty", "X"] {
            return Err(bad(format!("unexpected header {header:?}")));
        }
        let labels = cols[3..k - 3]
            .iter()
            .map(|c| {
                let parts: Vec<&str> = c.split('_').collect();
                match parts.as_slice() {
                    ["G", a, n] => Ok((a.parse().map_err(|_| bad(c.to_string()))?, n.parse().map_err(|_| bad(c.to_string()))?)),
                    _ => Err(bad(format!("unexpected column {c:?}"))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mut traj = Trajectory::new(m, labels);
        for (row, line) in lines.enumerate() {
            let line = line.map_err(|e| bad(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let vals = line
                .trim()
                .split(',')
                .map(|v| v.parse::<f64>().map_err(|_| bad(format!("row {}: {v:?}", row + 2))))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != k {
                return Err(bad(format!("row {} has {} fields, expected {k}", row + 2, vals.len())));
            }
            traj.samples.push(Sample {
                t: vals[0],
                q: vals[1],
                p: vals[2],
                moments: vals[3..k - 3].to_vec(),
                hq: vals[k - 3],
                uncertainty: vals[k - 2],
                x: vals[k - 1],
            });
        }
        Ok(traj)
    }
}

fn norm_on_grid(grid: &Trajectory, other: &Trajectory, lo: f64, hi: f64, metric: Metric) -> f64 {
    let pts: Vec<(f64, f64)> = grid
        .samples
        .iter()
        .filter(|s| s.t >= lo && s.t <= hi)
        .filter_map(|s| other.q_at(s.t).map(|q| (s.t, s.q - q)))
        .collect();
    match metric {
        Metric::Sup => pts.iter().map(|(_, d)| d.abs()).fold(0.0, f64::max),
        Metric::L2 => {
            if pts.len() < 2 || hi == lo {
                return pts.iter().map(|(_, d)| d.abs()).fold(0.0, f64::max);
            }
            let mut sorted = pts;
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let integral: f64 = sorted
                .windows(2)
                .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 * w[0].1 + w[1].1 * w[1].1))
                .sum();
            (integral / (sorted[sorted.len() - 1].0 - sorted[0].0)).sqrt()
        }
    }
}

/// Norm of `q_A - q_B` on the common time range, evaluated at the samples of
/// the coarser trajectory with the finer one interpolated. With equal sample
/// counts both directions are averaged, so the result is symmetric.
pub fn compare(a: &Trajectory, b: &Trajectory, metric: Metric) -> Result<f64> {
    let (a_lo, a_hi) = a.span().ok_or(Error::EmptyOverlap)?;
    let (b_lo, b_hi) = b.span().ok_or(Error::EmptyOverlap)?;
    let (lo, hi) = (a_lo.max(b_lo), a_hi.min(b_hi));
    if lo > hi {
        return Err(Error::EmptyOverlap);
    }
    let count = |t: &Trajectory| t.samples.iter().filter(|s| s.t >= lo && s.t <= hi).count();
    let (ca, cb) = (count(a), count(b));
    if ca == 0 && cb == 0 {
        return Err(Error::EmptyOverlap);
    }
    Ok(match ca.cmp(&cb) {
        std::cmp::Ordering::Less if ca > 0 => norm_on_grid(a, b, lo, hi, metric),
        std::cmp::Ordering::Greater if cb > 0 => norm_on_grid(b, a, lo, hi, metric),
        _ if ca == 0 => norm_on_grid(b, a, lo, hi, metric),
        _ if cb == 0 => norm_on_grid(a, b, lo, hi, metric),
        _ => 0.5 * (norm_on_grid(a, b, lo, hi, metric) + norm_on_grid(b, a, lo, hi, metric)),
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
