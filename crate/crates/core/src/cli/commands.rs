use rayon::prelude::*;

use super::{Cell, ResultTable, RunConfig};
use crate::conformal::ConformalMeasure;
use crate::density::{lower_bound_witness, sup_ratio_search, BoundConstants, Family, MeasureEstimate};
use crate::dimension::{self, dim_sweep_with, lyapunov_chi, DimensionResult};
use crate::error::Result;
use crate::ifs::SystemKind;
use crate::spectral::{operator_distance_bound, perturbation_probe, spectral_data, CollocationGrid, Truncation};

const GAUSS_TOL: f64 = 1e-11;
const MORAN_TOL: f64 = 1e-13;

/// Probe functions for the operator table with their BV norms (sup + variation).
const PROBES: [(&str, &str, fn(f64) -> f64, f64); 3] = [
    ("probe_one", "bound_one", |_| 1.0, 1.0),
    ("probe_x", "bound_x", |x| x, 2.0),
    ("probe_inv", "bound_inv", |x| 1.0 / (1.0 + x), 1.5),
];

fn solve(kind: SystemKind, n: u64, grid: usize) -> Result<DimensionResult> {
    match kind {
        SystemKind::LinearGauss => dimension::moran_dimension(n, MORAN_TOL),
        SystemKind::Gauss => dimension::gauss_dimension(n, grid, GAUSS_TOL),
    }
}

fn sorted_n(config: &RunConfig) -> Result<Vec<u64>> {
    let mut n = config.finite_n()?;
    n.sort_unstable();
    n.dedup();
    Ok(n)
}

/// Columns: `n, h_n, residual, n_one_minus_h, extrapolation, flag`.
pub fn cmd_dim(config: &RunConfig) -> Result<ResultTable> {
    let kind = config.kind;
    let n_list = sorted_n(config)?;
    let table = dim_sweep_with(kind, &n_list, |n| solve(kind, n, config.grid))?;
    let mut out = ResultTable::new(
        "dim",
        config,
        &["n", "h_n", "residual", "n_one_minus_h", "extrapolation", "flag"],
    );
    if let Some(e) = &table.extrapolation {
        out.meta("fit.limit", e.limit);
        out.meta("fit.slope", e.slope);
        if let Some(l) = e.limit_without_last {
            out.meta("fit.limit_without_last", l);
        }
    }
    if kind == SystemKind::LinearGauss {
        let chi = lyapunov_chi(1e-10)?;
        out.meta("fit.chi", chi.chi);
        if let Some(e) = &table.extrapolation {
            out.meta("fit.limit_times_chi", e.limit * chi.chi);
        }
    }
    for r in &table.rows {
        out.push(vec![
            r.n.into(),
            r.h.into(),
            r.residual.into(),
            r.normalized.into(),
            r.extrapolation.into(),
            Cell::from(if r.degenerate {
                "degenerate"
            } else if r.outside_fit {
                "outside_fit"
            } else {
                "ok"
            }),
        ])?;
    }
    Ok(out)
}

fn estimate(config: &RunConfig, n: u64) -> Result<(DimensionResult, MeasureEstimate, ConformalMeasure)> {
    let dim = solve(config.kind, n, config.grid)?;
    let measure = ConformalMeasure::from_dimension(&dim, config.grid)?;
    let est = sup_ratio_search(&measure, &config.family_spec(config.kind, n))?;
    Ok((dim, est, measure))
}

fn normalized_or_empty(est: &MeasureEstimate) -> Cell {
    let v = est.normalized();
    if v.is_finite() {
        Cell::Real(v)
    } else {
        Cell::Empty
    }
}

/// Columns: `n, h_n, H_lower, H_upper, normalized, witness_family, witness_lo,
/// witness_hi, cap_holds`, then `best_a..best_d` when `explain` is set.
pub fn cmd_measure(config: &RunConfig) -> Result<ResultTable> {
    let n_list = sorted_n(config)?;
    if n_list.contains(&1) {
        return Err(crate::Error::Domain("measure needs n >= 2".into()));
    }
    let mut cols = vec![
        "n",
        "h_n",
        "H_lower",
        "H_upper",
        "normalized",
        "witness_family",
        "witness_lo",
        "witness_hi",
        "cap_holds",
    ];
    if config.explain {
        cols.extend(["best_a", "best_b", "best_c", "best_d"]);
    }
    let mut out = ResultTable::new("measure", config, &cols);
    let c = BoundConstants::default();
    out.meta("fit.c", c.c);
    out.meta("fit.c3", c.c3);
    let results: Vec<_> = n_list.par_iter().map(|&n| estimate(config, n)).collect::<Result<_>>()?;
    for (dim, est, _) in &results {
        let mut row = vec![
            dim.n.into(),
            dim.h.into(),
            est.h_lower.into(),
            est.h_upper.into(),
            normalized_or_empty(est),
            Cell::from(est.best_family.tag()),
            est.best_interval.lo.into(),
            est.best_interval.hi.into(),
            Cell::from(if est.cap_holds { "true" } else { "false" }),
        ];
        if config.explain {
            for f in Family::ALL {
                row.push(
                    est.per_family
                        .iter()
                        .find(|b| b.family == f && b.best_ratio.is_finite())
                        .map(|b| b.best_ratio)
                        .into(),
                );
            }
        }
        out.push(row)?;
    }
    Ok(out)
}

/// Columns: `t, n, lambda, abs_dev`, then `probe_*`/`bound_*` for the three
/// probe functions and `within`. Probes are left empty for the linear kind.
pub fn cmd_operator(config: &RunConfig) -> Result<ResultTable> {
    let grid = CollocationGrid::new(config.grid)?;
    let mut cols = vec!["t", "n", "lambda", "abs_dev"];
    for (probe, bound, _, _) in PROBES {
        cols.extend([probe, bound]);
    }
    cols.push("within");
    let mut out = ResultTable::new("operator", config, &cols);
    let jobs: Vec<(f64, Truncation)> =
        config.t.iter().flat_map(|&t| config.n.iter().map(move |&n| (t, n))).collect();
    let rows: Vec<Vec<Cell>> = jobs
        .par_iter()
        .map(|&(t, n)| operator_row(config.kind, t, n, &grid))
        .collect::<Result<_>>()?;
    for r in rows {
        out.push(r)?;
    }
    Ok(out)
}

fn operator_row(kind: SystemKind, t: f64, n: Truncation, grid: &CollocationGrid) -> Result<Vec<Cell>> {
    let data = spectral_data(kind, t, n, grid)?;
    let mut row = vec![t.into(), Cell::from(n.to_string()), data.lambda.into(), (data.lambda - 1.0).abs().into()];
    let mut within = true;
    for (_, _, f, bv) in PROBES {
        if kind == SystemKind::LinearGauss {
            row.extend([Cell::Empty, Cell::Empty]);
            continue;
        }
        let (probe, bound) = match n {
            Truncation::Infinite => (0.0, 0.0),
            Truncation::Finite(n) => {
                (perturbation_probe(t, n, &grid.sample(f), grid)?, operator_distance_bound(t, n, bv))
            }
        };
        within &= probe <= bound;
        row.extend([probe.into(), bound.into()]);
    }
    row.push(Cell::from(if kind == SystemKind::LinearGauss {
        ""
    } else if within {
        "true"
    } else {
        "false"
    }));
    Ok(row)
}

/// Dimension and measure side by side. Columns: `n, h_n, n_one_minus_h,
/// H_upper, normalized, witness_family, eps, witness_ratio, witness_normalized`
/// with one row per `(n, eps)`.
pub fn cmd_sweep(config: &RunConfig) -> Result<ResultTable> {
    let n_list = sorted_n(config)?;
    if n_list.contains(&1) {
        return Err(crate::Error::Domain("sweep needs n >= 2".into()));
    }
    let mut out = ResultTable::new(
        "sweep",
        config,
        &[
            "n",
            "h_n",
            "n_one_minus_h",
            "H_upper",
            "normalized",
            "witness_family",
            "eps",
            "witness_ratio",
            "witness_normalized",
        ],
    );
    let results: Vec<_> = n_list.par_iter().map(|&n| estimate(config, n)).collect::<Result<_>>()?;
    for (dim, est, measure) in &results {
        for &eps in &config.eps {
            let w = lower_bound_witness(measure, eps)?;
            out.push(vec![
                dim.n.into(),
                dim.h.into(),
                dim.normalized_defect().into(),
                est.h_upper.into(),
                normalized_or_empty(est),
                Cell::from(est.best_family.tag()),
                eps.into(),
                w.ratio.into(),
                w.normalized.into(),
            ])?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(pairs: &[(&str, &str)]) -> RunConfig {
        let mut c = RunConfig::default();
        let p: Vec<(String, String)> = pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        c.apply(&p).unwrap();
        c
    }

    #[test]
    fn dim_degenerate_row() {
        let t = cmd_dim(&config(&[("kind", "linear"), ("n", "1")])).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0][1], Cell::Real(0.0));
        assert_eq!(t.rows[0][5], Cell::from("degenerate"));
    }

    #[test]
    fn measure_fallback_only() {
        let t = cmd_measure(&config(&[("kind", "gauss"), ("n", "4"), ("families", "")])).unwrap();
        assert_eq!(t.rows.len(), 1);
        let lo = t.column("witness_lo").unwrap();
        assert_eq!(t.rows[0][lo], Cell::Real(0.2));
        assert_eq!(t.rows[0][t.column("witness_hi").unwrap()], Cell::Real(1.0));
    }

    #[test]
    fn operator_probes_within_bounds() {
        let t = cmd_operator(&config(&[("n", "10,100,inf"), ("t", "1"), ("grid", "32")])).unwrap();
        let w = t.column("within").unwrap();
        assert!(t.rows.iter().all(|r| r[w] == Cell::from("true")));
        let dev = t.column("abs_dev").unwrap();
        match t.rows[2][dev] {
            Cell::Real(v) => assert!(v < 1e-10),
            _ => panic!("missing deviation"),
        }
    }
}
