//! Rows of the CSV artifacts, shared by the commands and the verification suite.

use anyhow::Result;
use levy_fbsde::{HedgeReport, PideSolution, PriceResult, ResidualReport, SamplePath, TeugelsBasis};

use crate::output::{header, num, OutputDir};

/// `basis.csv`: `(i, q_{i−1} coefficients…, q_{i−1}(0), ∫p_i²ν)`, optionally prefixed by a model
/// label. Coefficient columns are padded to the largest order.
pub fn write_basis(out: &OutputDir, entries: &[(String, TeugelsBasis)], labelled: bool) -> Result<()> {
    let width = entries.iter().map(|(_, b)| b.order()).max().unwrap_or(0);
    let mut cols = Vec::new();
    if labelled {
        cols.push("model".to_string());
    }
    cols.push("i".into());
    cols.extend((0..width).map(|k| format!("q_c{k}")));
    cols.push("q0".into());
    cols.push("p_norm".into());

    let mut rows = Vec::new();
    for (label, basis) in entries {
        for i in 0..basis.order() {
            let mut row = Vec::new();
            if labelled {
                row.push(label.clone());
            }
            row.push((i + 1).to_string());
            let coeffs = basis.q()[i].coeffs();
            row.extend((0..width).map(|k| num(coeffs.get(k).copied().unwrap_or(0.0))));
            row.push(num(basis.q0()[i]));
            row.push(num(basis.p_norms()[i]));
            rows.push(row);
        }
    }
    out.csv("basis.csv", &cols, rows)
}

/// `paths.csv`: one row per step, jump sizes joined by `;`.
pub fn write_paths(out: &OutputDir, paths: &[SamplePath]) -> Result<()> {
    let m = paths.first().map_or(0, SamplePath::order);
    let mut cols = header(["path", "step", "t", "dB", "n_jumps", "jump_sizes"]);
    cols.extend((1..=m).map(|i| format!("dH_{i}")));
    let rows = paths.iter().enumerate().flat_map(|(k, path)| {
        (0..path.grid().n_steps()).map(move |s| {
            let jumps = path.jumps(s);
            let mut row = vec![
                k.to_string(),
                s.to_string(),
                num(path.grid().time(s + 1)),
                num(path.db()[s]),
                jumps.len().to_string(),
                jumps.iter().map(|j| num(j.size)).collect::<Vec<_>>().join(";"),
            ];
            row.extend(path.dh(s).iter().map(|v| num(*v)));
            row
        })
    });
    out.csv("paths.csv", &cols, rows)
}

/// `theta.csv`: `(t, x…, θ_1…θ_Q, θ⁽¹⁾_{1,1}…)` for every `stride`-th time level and the last.
pub fn write_theta(out: &OutputDir, solution: &PideSolution, stride: usize) -> Result<()> {
    let spatial = solution.spatial();
    let (q, m, p) = (solution.q(), solution.m(), spatial.dim());
    let mut cols = header(["t"]);
    cols.extend((1..=p).map(|k| format!("x_{k}")));
    cols.extend((1..=q).map(|c| format!("theta_{c}")));
    for c in 1..=q {
        cols.extend((1..=m).map(|i| format!("theta1_{c}_{i}")));
    }
    let n_steps = solution.time_grid().n_steps();
    let stride = stride.max(1);
    let levels: Vec<usize> = (0..=n_steps)
        .filter(|s| s % stride == 0 || *s == n_steps)
        .collect();
    let rows = levels.into_iter().flat_map(|s| {
        let t = solution.time_grid().time(s);
        let theta = solution.theta(s);
        let theta1 = solution.theta1(s);
        (0..spatial.n_nodes()).map(move |n| {
            let mut row = vec![num(t)];
            row.extend(spatial.coords(n).iter().map(|v| num(*v)));
            row.extend(theta[n * q..(n + 1) * q].iter().map(|v| num(*v)));
            row.extend(theta1[n * q * m..(n + 1) * q * m].iter().map(|v| num(*v)));
            row
        })
    });
    out.csv("theta.csv", &cols, rows)
}

/// `iterations.csv`: the outer fixed-point residuals per solved range.
pub fn write_iterations(out: &OutputDir, solution: &PideSolution) -> Result<()> {
    let cols = header(["range", "t_start", "t_end", "sweep", "residual", "converged"]);
    let rows = solution
        .iteration_log()
        .iter()
        .enumerate()
        .flat_map(|(k, log)| {
            log.residuals.iter().enumerate().map(move |(sweep, r)| {
                vec![
                    k.to_string(),
                    num(log.t_start),
                    num(log.t_end),
                    (sweep + 1).to_string(),
                    num(*r),
                    u8::from(log.converged).to_string(),
                ]
            })
        });
    out.csv("iterations.csv", &cols, rows)
}

/// `residuals.csv`: `(path, R_1…R_Q, escaped)`; escaped paths have empty residuals.
pub fn write_residuals(out: &OutputDir, report: &ResidualReport, q: usize) -> Result<()> {
    let mut cols = header(["path"]);
    cols.extend((1..=q).map(|c| format!("R_{c}")));
    cols.push("escaped".into());
    let rows = report.residuals.iter().enumerate().map(|(k, r)| {
        let mut row = vec![k.to_string()];
        match r {
            Some(values) => {
                row.extend(values.iter().map(|v| num(*v)));
                row.push("0".into());
            }
            None => {
                row.extend(std::iter::repeat_n(String::new(), q));
                row.push("1".into());
            }
        }
        row
    });
    out.csv("residuals.csv", &cols, rows)
}

/// `price_surface.csv`: `(q…, S…, W)` at `t = 0`.
pub fn write_surface(out: &OutputDir, result: &PriceResult) -> Result<()> {
    let d = result.solution.spatial().dim();
    let mut cols: Vec<String> = (1..=d).map(|j| format!("q_{j}")).collect();
    cols.extend((1..=d).map(|j| format!("S_{j}")));
    cols.push("W".into());
    let rows = result.surface().into_iter().map(|(q, w)| {
        let mut row: Vec<String> = q.iter().map(|v| num(*v)).collect();
        row.extend(q.iter().map(|v| num(v.exp())));
        row.push(num(w));
        row
    });
    out.csv("price_surface.csv", &cols, rows)
}

/// `hedge_report.csv`: per path, the terminal error, largest fit residual and initial holdings.
pub fn write_hedge(out: &OutputDir, report: &HedgeReport) -> Result<()> {
    let d = report.d;
    let mut cols = header(["path", "escaped", "terminal_error", "max_fit_residual"]);
    cols.extend((1..=d).map(|j| format!("alpha0_{j}")));
    let rows = report.terminal_error.iter().enumerate().map(|(k, e)| match e {
        Some(err) => {
            let fit = report.fit_residual[k].iter().copied().fold(0.0, f64::max);
            let mut row = vec![k.to_string(), "0".into(), num(*err), num(fit)];
            row.extend(report.alpha[k][..d].iter().map(|v| num(*v)));
            row
        }
        None => {
            let mut row = vec![k.to_string(), "1".into(), String::new(), String::new()];
            row.extend(std::iter::repeat_n(String::new(), d));
            row
        }
    });
    out.csv("hedge_report.csv", &cols, rows)
}
