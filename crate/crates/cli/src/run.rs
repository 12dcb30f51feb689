use genfrac::multidim::{el_residual_nd, wave_residual, GridFunctionND, LagrangianND, PVector, ResidualReportND, WaveForm};
use genfrac::noether::{check_invariance, conserved_quantity, noether_residual, relative_stdev, Generator};
use genfrac::optimize::BfgsOptions;
use genfrac::variational::{
    el_residual, eval_functional, natural_boundary_residual, solve_fundamental_with, solve_isoperimetric_with,
};
use genfrac::{
    builtins, Boundary, Constraint, Grid, GridFunction, LagrangianSpec, OperatorHandle, PSet, ProblemSpec,
    ResidualReport, SolverOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{power_series, Kind, NdLagrangian, RunConfig};
use crate::error::CliError;
use crate::output::Artifacts;

pub struct Options {
    pub grid_n: Option<usize>,
    pub seed: u64,
}

/// Result of one run: the summary document and its one-line rendering.
pub struct Outcome {
    pub summary: Value,
    pub line: String,
}

pub fn execute(kind: Kind, cfg: &RunConfig, opts: &Options, out: &mut Artifacts) -> Result<Outcome, CliError> {
    check_sections(kind, cfg)?;
    let outcome = match kind {
        Kind::OperatorEval => operator_eval(cfg, opts, out)?,
        Kind::Solve => solve(cfg, opts, out)?,
        Kind::ElCheck => el_check(cfg, opts, out)?,
        Kind::IsoSolve => iso_solve(cfg, opts, out)?,
        Kind::Noether => noether(cfg, opts, out)?,
        Kind::MultidimCheck => multidim_check(cfg, opts, out)?,
    };
    let mut summary = outcome.summary;
    summary["kind"] = json!(kind.as_str());
    out.json("summary", &summary)?;
    Ok(Outcome { summary, line: format!("{}: {}", kind.as_str(), outcome.line) })
}

/// Rejects sections that the problem kind would silently ignore.
fn check_sections(kind: Kind, cfg: &RunConfig) -> Result<(), CliError> {
    let present = [
        ("grid", cfg.grid.is_some()),
        ("kernel", cfg.kernel.is_some()),
        ("pset", cfg.pset.is_some()),
        ("lagrangian", cfg.lagrangian.is_some()),
        ("boundary", cfg.boundary.is_some()),
        ("constraints", !cfg.constraints.is_empty()),
        ("trajectory", cfg.trajectory.is_some()),
        ("solver", cfg.solver.is_some()),
        ("operator_eval", cfg.operator_eval.is_some()),
        ("noether", cfg.noether.is_some()),
        ("multidim", cfg.multidim.is_some()),
    ];
    let (required, optional): (&[&str], &[&str]) = match kind {
        Kind::OperatorEval => (&["grid", "kernel", "operator_eval"], &["pset"]),
        Kind::Solve => (&["grid", "kernel", "lagrangian", "boundary"], &["pset", "solver"]),
        Kind::ElCheck => (&["grid", "kernel", "lagrangian", "trajectory"], &["pset", "boundary", "solver"]),
        Kind::IsoSolve => (&["grid", "kernel", "lagrangian", "boundary", "constraints"], &["pset", "solver"]),
        Kind::Noether => (&["grid", "kernel", "lagrangian", "trajectory"], &["pset", "boundary", "solver", "noether"]),
        Kind::MultidimCheck => (&["multidim"], &[]),
    };
    let mut problems = vec![];
    for (name, here) in present {
        if required.contains(&name) && !here {
            problems.push(format!("missing [{name}]"));
        }
        if here && !required.contains(&name) && !optional.contains(&name) {
            problems.push(format!("[{name}] is not used by {}", kind.as_str()));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::validation(problems.join("; ")))
    }
}

fn residual_table(out: &mut Artifacts, name: &str, r: &ResidualReport) -> Result<(), CliError> {
    out.table(name, &["t", "residual"], &[r.nodes.clone(), r.residual.clone()])
}

fn function_table(out: &mut Artifacts, name: &str, column: &str, f: &GridFunction) -> Result<(), CliError> {
    out.table(name, &["t", column], &[f.nodes(), f.values.clone()])
}

fn solver_options(cfg: &RunConfig) -> SolverOptions {
    let mut bfgs = BfgsOptions::default();
    if let Some(s) = cfg.solver {
        bfgs.gradient_tolerance = s.gradient_tolerance.unwrap_or(bfgs.gradient_tolerance);
        bfgs.max_iterations = s.max_iterations.unwrap_or(bfgs.max_iterations);
    }
    SolverOptions { bfgs, initial: None }
}

struct Setup {
    grid: Grid,
    op: OperatorHandle,
    f: LagrangianSpec,
}

fn setup(cfg: &RunConfig, opts: &Options) -> Result<Setup, CliError> {
    let grid = cfg.grid(opts.grid_n)?;
    Ok(Setup { op: cfg.operator(&grid)?, f: cfg.lagrangian()?, grid })
}

fn problem(cfg: &RunConfig, s: &Setup, constraints: Vec<Constraint>) -> Result<ProblemSpec, CliError> {
    let b = cfg.boundary()?;
    Ok(ProblemSpec {
        lagrangian: s.f.clone(),
        op: s.op.clone(),
        boundary: Boundary { left: b.left, right: b.right },
        constraints,
        grid: s.grid,
    })
}

fn operator_eval(cfg: &RunConfig, opts: &Options, out: &mut Artifacts) -> Result<Outcome, CliError> {
    let eval = cfg.operator_eval.as_ref().expect("checked section");
    if eval.function.is_empty() {
        return Err(CliError::validation("operator_eval.function needs at least one term"));
    }
    let grid = cfg.grid(opts.grid_n)?;
    let op = cfg.operator(&grid)?;
    let f = power_series(&eval.function, grid);
    let disc = op.discretize(&grid)?;
    let (k, a, b) = (disc.apply_k(&f.values), disc.apply_a(&f.values), disc.apply_b(&f.values));
    out.table("operator", &["t", "f", "K", "A", "B"], &[f.nodes(), f.values.clone(), k.clone(), a, b])?;

    if !eval.points.is_empty() {
        let mut cols = vec![vec![]; 5];
        for &t in &eval.points {
            let av = op.eval_a(&f, t)?;
            cols[0].push(t);
            cols[1].push(op.eval_k(&f, t)?);
            cols[2].push(av.value);
            cols[3].push(op.eval_b(&f, t)?);
            cols[4].push(if av.one_sided { 1.0 } else { 0.0 });
        }
        out.table("points", &["t", "K", "A", "B", "one_sided"], &cols)?;
    }

    let mut summary = json!({
        "grid": grid,
        "kernel": op.kernel().name(),
        "pset": op.pset(),
        "max_abs_k": k.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        "k_at_b": k[grid.n],
    });
    let mut line = format!("n={} K(b)={:.10e}", grid.n, k[grid.n]);
    if eval.property_trials > 0 {
        let props = properties(&op, &grid, eval.property_trials, opts.seed)?;
        line.push_str(&format!(
            " linearity={:.1e} split={:.1e} dual_involution={}",
            props["linearity"].as_f64().unwrap_or(f64::NAN),
            props["left_right_split"].as_f64().unwrap_or(f64::NAN),
            props["dual_involution"]
        ));
        summary["properties"] = props;
    }
    Ok(Outcome { summary, line })
}

/// Random checks of linearity, the left/right split and the dual involution.
fn properties(op: &OperatorHandle, grid: &Grid, trials: usize, seed: u64) -> Result<Value, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = *op.pset();
    let both = op.discretize(grid)?;
    let left = op.with_pset(PSet::left(p.a, p.b)?)?.discretize(grid)?;
    let right = op.with_pset(PSet::right(p.a, p.b)?)?.discretize(grid)?;
    let mut linearity = 0.0_f64;
    let mut split = 0.0_f64;
    for _ in 0..trials {
        let f: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s: f64 = rng.random_range(-2.0..2.0);
        let mix: Vec<f64> = f.iter().zip(&g).map(|(u, v)| u + s * v).collect();
        let (kf, kg, km) = (both.apply_k(&f), both.apply_k(&g), both.apply_k(&mix));
        let (kl, kr) = (left.apply_k(&mix), right.apply_k(&mix));
        for j in 0..grid.len() {
            let want = kf[j] + s * kg[j];
            linearity = linearity.max((km[j] - want).abs() / (1.0 + want.abs()));
            let want = p.lambda * kl[j] + p.mu * kr[j];
            split = split.max((km[j] - want).abs() / (1.0 + want.abs()));
        }
    }
    Ok(json!({
        "trials": trials,
        "seed": seed,
        "linearity": linearity,
        "left_right_split": split,
        "dual_involution": op.dual().dual().pset() == op.pset(),
    }))
}

fn solve(cfg: &RunConfig, opts: &Options, out: &mut Artifacts) -> Result<Outcome, CliError> {
    let s = setup(cfg, opts)?;
    let sol = solve_fundamental_with(&problem(cfg, &s, vec![])?, &solver_options(cfg))?;
    function_table(out, "y", "y", &sol.y)?;
    residual_table(out, "el_residual", &sol.report)?;
    let mut report = sol.report.summary_json();
    report["functional"] = json!(sol.functional);
    report["iterations"] = json!(sol.iterations);
    report["gradient_norm"] = json!(sol.gradient_norm);
    if cfg.boundary()?.left.is_none() {
        report["natural_boundary"] = json!(natural_boundary_residual(&s.f, &s.op, &sol.y)?);
    }
    out.json("el_residual", &report)?;
    let line = format!(
        "n={} iterations={} functional={:.10e} el_residual max_abs={:.3e} l2={:.3e}",
        s.grid.n, sol.iterations, sol.functional, sol.report.max_abs, sol.report.l2
    );
    Ok(Outcome { summary: json!({ "lagrangian": s.f.name(), "grid": s.grid, "el_residual": report }), line })
}

/// The configured trajectory, solving first when asked to.
fn trajectory(cfg: &RunConfig, s: &Setup) -> Result<(GridFunction, &'static str), CliError> {
    let tr = cfg.trajectory.as_ref().expect("checked section");
    match (tr.solve, tr.terms.is_empty()) {
        (true, true) => {
            let sol = solve_fundamental_with(&problem(cfg, s, vec![])?, &solver_options(cfg))?;
            Ok((sol.y, "solver"))
        }
        (false, false) => Ok((power_series(&tr.terms, s.grid), "terms")),
        _ => Err(CliError::validation("trajectory needs either 'terms' or 'solve = true'")),
    }
}

fn el_check(cfg: &RunConfig, opts: &Options, out: &mut Artifacts) -> Result<Outcome, CliError> {
    let s = setup(cfg, opts)?;
    let (y, source) = trajectory(cfg, &s)?;
    let r = el_residual(&s.f, &s.op, &y)?;
    residual_table(out, "el_residual", &r)?;
    let mut report = r.summary_json();
    report["functional"] = json!(eval_functional(&s.f, &s.op, &y)?);
    report["natural_boundary"] = json!(natural_boundary_residual(&s.f, &s.op, &y)?);
    out.json("el_residual", &report)?;
    let line = format!("n={} trajectory={source} el_residual max_abs={:.3e} l2={:.3e}", s.grid.n, r.max_abs, r.l2);
    Ok(Outcome { summary: json!({ "lagrangian": s.f.name(), "grid": s.grid, "el_residual": report }), line })
}

fn iso_solve(cfg: &RunConfig, opts: &Options, out: &mut Artifacts) -> Result<Outcome, CliError> {
    let s = setup(cfg, opts)?;
    let constraints = cfg
        .constraints
        .iter()
        .map(|c| Ok(Constraint { g: c.lagrangian.build()?, target: c.target }))
        .collect::<Result<Vec<_>, CliError>>()?;
    let sol = solve_isoperimetric_with(&problem(cfg, &s, constraints)?, &solver_options(cfg))?;
    function_table(out, "y", "y", &sol.y)?;
    residual_table(out, "el_residual", &sol.report)?;
    let report = sol.report.summary_json();
    out.json("el_residual", &report)?;
    let multipliers: Vec<String> = sol.multipliers.iter().map(|l| format!("{l:.10e}")).collect();
    let line = format!(
        "n={} multipliers=[{}] outer_iterations={} el_residual max_abs={:.3e}",
        s.grid.n,
        multipliers.join(", "),
        sol.outer_iterations,
        sol.report.max_abs
    );
    Ok(Outcome {
        summary: json!({
            "lagrangian": s.f.name(),
            "grid": s.grid,
            "multipliers": sol.multipliers,
            "constraint_values": sol.constraint_values,
            "targets": cfg.constraints.iter().map(|c| c.target).collect::<Vec<_>>(),
            "outer_iterations": sol.outer_iterations,
            "el_residual": report,
        }),
        line,
    })
}

fn noether(cfg: &RunConfig, opts: &Options, out: &mut Artifacts) -> Result<Outcome, CliError> {
    let s = setup(cfg, opts)?;
    let (y, source) = trajectory(cfg, &s)?;
    let n = cfg.noether.unwrap_or(crate::config::NoetherConfig { generator: 1.0, epsilon: 1e-2 });
    let gen = Generator::constant(n.generator, n.epsilon)?;
    let inv = check_invariance(&s.f, &gen, &s.op, &y)?;
    let residual = noether_residual(&s.f, &gen, &s.op, &y)?;
    residual_table(out, "noether_residual", &residual)?;
    let invariance = serde_json::to_value(&inv).expect("report serializes");
    out.json("invariance", &invariance)?;
    let mut summary = json!({
        "lagrangian": s.f.name(),
        "grid": s.grid,
        "trajectory": source,
        "invariance": invariance,
        "noether_residual": residual.summary_json(),
    });
    let mut line = format!(
        "n={} trajectory={source} exact={} first_order={} noether_residual max_abs={:.3e}",
        s.grid.n, inv.exact, inv.first_order, residual.max_abs
    );
    if s.f.depends_only_on_by() {
        let q = conserved_quantity(&s.f, &s.op, &y)?;
        function_table(out, "conserved_quantity", "Q", &q)?;
        let rsd = relative_stdev(&q);
        let mean = q.values.iter().sum::<f64>() / q.values.len() as f64;
        summary["conserved_quantity"] = json!({ "mean": mean, "relative_stdev": rsd });
        line.push_str(&format!(" Q mean={mean:.10e} relative_stdev={rsd:.3e}"));
    }
    Ok(Outcome { summary, line })
}

fn multidim_check(cfg: &RunConfig, opts: &Options, out: &mut Artifacts) -> Result<Outcome, CliError> {
    let m = cfg.multidim.as_ref().expect("checked section");
    if m.axes.is_empty() {
        return Err(CliError::validation("multidim.axes is empty"));
    }
    let mut grids = vec![];
    let mut ops = vec![];
    for axis in &m.axes {
        let g = Grid::new(axis.a, axis.b, opts.grid_n.unwrap_or(axis.n))?;
        let kernel = builtins::kernel(&axis.kernel.name, &axis.kernel.params)?;
        ops.push(OperatorHandle::new(PSet::new(g.a, g.b, axis.lambda, axis.mu)?, kernel)?);
        grids.push(g);
    }
    let pv = PVector::new(ops)?;
    let y = field(&m.field, grids)?;
    let report: ResidualReportND = match m.lagrangian {
        NdLagrangian::Dirichlet => {
            if m.form.is_some() {
                return Err(CliError::validation("multidim.form applies to the wave Lagrangian only"));
            }
            el_residual_nd(&LagrangianND::dirichlet(), &pv, &y)?
        }
        NdLagrangian::Wave => wave_residual(m.form.unwrap_or(WaveForm::TimeFractional), &pv, m.rho, m.k, &y)?,
    };
    let r = report.as_grid_function()?;
    let shape = r.shape();
    let d = r.dims();
    let mut header: Vec<String> = (0..d).map(|i| format!("i{i}")).collect();
    header.extend((0..d).map(|i| format!("t{i}")));
    header.push("residual".into());
    let mut cols = vec![Vec::with_capacity(r.values.len()); 2 * d + 1];
    for (k, v) in r.values.iter().enumerate() {
        let mut rest = k;
        let mut index = vec![0; d];
        for i in (0..d).rev() {
            index[i] = rest % shape[i];
            rest /= shape[i];
        }
        let p = r.point(&index);
        for i in 0..d {
            cols[i].push(index[i] as f64);
            cols[d + i].push(p[i]);
        }
        cols[2 * d].push(*v);
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.table("residual", &header_refs, &cols)?;
    let mut summary = report.summary_json();
    summary["lagrangian"] = json!(m.lagrangian);
    summary["field"] = json!(m.field.name);
    let mut line = format!("dims={d} residual max_abs={:.3e} l2={:.3e}", report.max_abs, report.l2);
    if m.margin > 0 {
        let within = report.max_abs_within(m.margin);
        summary["margin"] = json!(m.margin);
        summary["max_abs_within_margin"] = json!(within);
        line.push_str(&format!(" within margin {}={within:.3e}", m.margin));
    }
    out.json("residual_summary", &summary)?;
    Ok(Outcome { summary, line })
}

fn field(cfg: &crate::config::FieldConfig, axes: Vec<Grid>) -> Result<GridFunctionND, CliError> {
    let d = axes.len();
    let check_params = |allowed: &[&str]| -> Result<(), CliError> {
        match cfg.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(CliError::validation(format!("field {} takes no parameter '{k}'", cfg.name))),
            None => Ok(()),
        }
    };
    if cfg.name != "polynomial" && !cfg.terms.is_empty() {
        return Err(CliError::validation("field terms apply to the polynomial field only"));
    }
    match cfg.name.as_str() {
        "plane_wave" => {
            check_params(&["speed"])?;
            if d < 2 {
                return Err(CliError::validation("plane_wave needs a time axis and a space axis"));
            }
            let c = cfg.params.get("speed").copied().unwrap_or(1.0);
            Ok(GridFunctionND::from_fn(axes, |p| (p[1] - c * p[0]).sin()))
        }
        "exp_sin" => {
            check_params(&[])?;
            if d != 2 {
                return Err(CliError::validation("exp_sin is defined on two axes"));
            }
            Ok(GridFunctionND::from_fn(axes, |p| p[0].exp() * p[1].sin()))
        }
        "polynomial" => {
            check_params(&[])?;
            if cfg.terms.is_empty() || cfg.terms.iter().any(|t| t.powers.len() != d) {
                return Err(CliError::validation(format!("polynomial field needs terms with {d} powers each")));
            }
            let terms = cfg.terms.clone();
            Ok(GridFunctionND::from_fn(axes, move |p| {
                terms
                    .iter()
                    .map(|t| t.powers.iter().zip(p).fold(t.coefficient, |acc, (&e, &x)| acc * x.powi(e as i32)))
                    .sum()
            }))
        }
        other => Err(CliError::validation(format!(
            "unknown field '{other}'; known: plane_wave, exp_sin, polynomial"
        ))),
    }
}
