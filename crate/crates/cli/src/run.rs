//! Dispatches a [`RunConfig`] and writes its CSV artifacts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use dual_elasticity::cases::{
    self, build_case, nested_l1_difference, packet_speeds, refinement_study, wave_speed, CaseError, CaseKind,
    CaseName, CaseOptions, CaseSpec, DynamicRunReport, RunReport, BUMP_CENTRES, BUMP_HALF_WIDTH,
};
use dual_elasticity::convexity::{bound_check, convexity_check, infinity_check, DualModel};
use dual_elasticity::mesh::Mesh1D;
use dual_elasticity::newton::NewtonReport;
use dual_elasticity::primal::{self, PrimalError, PrimalOptions};
use dual_elasticity::report::{Cell, Table};

use crate::config::{Job, RunConfig, Suite};

/// Largest `|ê - e_eq|` over the window that still counts as stable.
pub const STABILITY_THRESHOLD: f64 = 1e-2;
/// Primal states kept per run, at most.
const PRIMAL_RECORDS: usize = 400;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error("{case}: primal reference failed: {source}")]
    Primal { case: String, source: PrimalError },
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// What a run produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    /// Files written, in order.
    pub files: Vec<PathBuf>,
    /// One-line verdicts of dynamics comparisons and convexity checks.
    pub verdicts: Vec<String>,
}

struct Ctx<'a> {
    config: &'a RunConfig,
    out: &'a mut dyn Write,
    summary: RunSummary,
}

impl Ctx<'_> {
    fn write_table(&mut self, name: &str, table: &Table) -> Result<(), RunError> {
        let path = self.config.out_dir.join(name);
        let io = |source| RunError::Io {
            path: path.clone(),
            source,
        };
        let file = fs::File::create(&path).map_err(io)?;
        let mut w = std::io::BufWriter::new(file);
        table.write_csv(&mut w).map_err(io)?;
        w.flush().map_err(io)?;
        self.summary.files.push(path);
        Ok(())
    }

    fn say(&mut self, line: impl AsRef<str>) {
        // Console output is best effort.
        let _ = writeln!(self.out, "{}", line.as_ref());
    }

    fn verdict(&mut self, line: String) {
        self.say(&line);
        self.summary.verdicts.push(line);
    }
}

/// File-name stem of a case, e.g. `hat_bifurcation_a0.2`.
pub fn case_stem(name: &CaseName) -> String {
    match name {
        CaseName::HatBifurcation(a) => format!("hat_bifurcation_a{a}"),
        other => other.to_string(),
    }
}

/// Static cases of the statics suite, in order.
pub fn static_suite() -> Vec<CaseName> {
    vec![
        CaseName::StressFree,
        CaseName::StressedHomogeneous,
        CaseName::StressedInhomogeneous,
        CaseName::GrainBoundaryStatic,
        CaseName::HatBifurcation(0.2),
        CaseName::HatBifurcation(1.0),
    ]
}

pub fn dynamic_suite() -> Vec<CaseName> {
    vec![CaseName::GrainBoundaryDynamic, CaseName::PerturbedDynamic]
}

/// Runs the configured case or suite, writing CSV files into `out_dir`
/// and a human-readable report to `out`.
pub fn run(config: &RunConfig, out: &mut dyn Write) -> Result<RunSummary, RunError> {
    fs::create_dir_all(&config.out_dir).map_err(|source| RunError::Io {
        path: config.out_dir.clone(),
        source,
    })?;
    let mut ctx = Ctx {
        config,
        out,
        summary: RunSummary::default(),
    };
    write_resolved_config(&mut ctx)?;
    match config.job {
        Job::Case(name) => run_case(&mut ctx, name)?,
        Job::Suite(suite) => {
            let (statics, dynamics, convexity) = match suite {
                Suite::Statics => (true, false, false),
                Suite::Dynamics => (false, true, false),
                Suite::Convexity => (false, false, true),
                Suite::All => (true, true, true),
            };
            if statics {
                for name in static_suite() {
                    run_case(&mut ctx, name)?;
                }
            }
            if dynamics {
                for name in dynamic_suite() {
                    run_case(&mut ctx, name)?;
                }
            }
            if convexity {
                run_convexity(&mut ctx)?;
            }
        }
    }
    Ok(ctx.summary)
}

fn write_resolved_config(ctx: &mut Ctx) -> Result<(), RunError> {
    let path = ctx.config.out_dir.join("config.toml");
    let text = toml::to_string(&ctx.config.to_file()).expect("config serializes");
    fs::write(&path, text).map_err(|source| RunError::Io {
        path: path.clone(),
        source,
    })?;
    ctx.summary.files.push(path);
    Ok(())
}

fn case_options(config: &RunConfig) -> CaseOptions {
    CaseOptions {
        aux: config.aux,
        final_time: config.final_time,
        perturbation: config.perturbation,
    }
}

fn run_case(ctx: &mut Ctx, name: CaseName) -> Result<(), RunError> {
    let spec = build_case(name, &case_options(ctx.config))?;
    match &spec.kind {
        CaseKind::Static { .. } => run_static(ctx, &spec),
        CaseKind::Dynamic { nx, nt, .. } => {
            let (nx, nt) = (ctx.config.nx.unwrap_or(*nx), ctx.config.nt.unwrap_or(*nt));
            run_dynamic(ctx, &spec, nx, nt)
        }
    }
}

fn param_cells(spec: &CaseSpec) -> Vec<Cell> {
    vec![spec.aux.c_u.into(), spec.aux.c_e.into(), spec.aux.c_v.into(), spec.aux.rho0.into()]
}

fn newton_rows(table: &mut Table, lead: &[Cell], report: &NewtonReport) {
    for (k, r) in report.history.iter().enumerate() {
        let mut row = lead.to_vec();
        row.push(k.into());
        row.push((*r).into());
        table.push(row);
    }
}

fn run_static(ctx: &mut Ctx, spec: &CaseSpec) -> Result<(), RunError> {
    let ladder = ctx.config.elements.clone().unwrap_or_else(|| spec.refinement.clone());
    let stem = case_stem(&spec.name);
    let runs = refinement_study(spec, &ladder, &ctx.config.newton)?;

    for r in &runs {
        let table = static_field_table(r);
        ctx.write_table(&format!("{stem}_n{}.csv", r.n_elements), &table)?;
    }
    let mut history = Table::new(&["case", "n_elements", "c_u", "c_e", "c_v", "rho0", "iteration", "residual"]);
    for r in &runs {
        let mut lead = vec![spec.name.to_string().into(), r.n_elements.into()];
        lead.extend(param_cells(spec));
        newton_rows(&mut history, &lead, r.newton());
    }
    ctx.write_table(&format!("{stem}_newton.csv"), &history)?;

    ctx.say(format!(
        "{}  (c_u = {}, c_e = {}, Newton tol = {:e})",
        spec.name, spec.aux.c_u, spec.aux.c_e, ctx.config.newton.tol
    ));
    if spec.target.is_some() {
        let mut table = Table::new(&[
            "case",
            "n_elements",
            "c_u",
            "c_e",
            "c_v",
            "rho0",
            "u_error_l1",
            "e_error_l1",
            "e_error_l1_points",
            "stress_spread",
            "newton_iterations",
        ]);
        ctx.say(format!(
            "  {:>8}  {:>14}  {:>14}  {:>14}  {:>12}  {:>6}",
            "n_e", "|u^ - u|_1", "|e^ - e|_1", "|e^ - e|_1 qp", "stress spread", "Newton"
        ));
        for r in &runs {
            let (u, e, ep) = (r.u_error.unwrap(), r.e_error.unwrap(), r.e_error_points.unwrap());
            let spread = r.solution.stress_spread();
            let it = r.newton().iterations;
            ctx.say(format!("  {:>8}  {u:>14.3e}  {e:>14.3e}  {ep:>14.3e}  {spread:>12.3e}  {it:>6}", r.n_elements));
            let mut row = vec![spec.name.to_string().into(), r.n_elements.into()];
            row.extend(param_cells(spec));
            row.extend([u.into(), e.into(), ep.into(), spread.into(), it.into()]);
            table.push(row);
        }
        ctx.write_table(&format!("{stem}_errors.csv"), &table)?;
    } else {
        // No closed-form solution: compare with the finest mesh.
        let (fine, coarse) = runs.split_last().expect("validated ladder is non-empty");
        let mut table = Table::new(&[
            "case",
            "n_elements",
            "reference_elements",
            "c_u",
            "c_e",
            "c_v",
            "rho0",
            "u_difference_l1",
            "e_difference_l1",
            "newton_iterations",
        ]);
        ctx.say(format!(
            "  {:>8}  {:>20}  {:>20}  {:>6}",
            "n_e",
            format!("|u^ - u^({})|_1", fine.n_elements),
            format!("|e^ - e^({})|_1", fine.n_elements),
            "Newton"
        ));
        for r in coarse {
            let (cm, fm) = (&r.solution.mesh, &fine.solution.mesh);
            let du = nested_l1_difference(cm, &r.solution.u_nodal, fm, &fine.solution.u_nodal);
            let de = nested_l1_difference(cm, &r.solution.e_nodal, fm, &fine.solution.e_nodal);
            let it = r.newton().iterations;
            ctx.say(format!("  {:>8}  {du:>20.3e}  {de:>20.3e}  {it:>6}", r.n_elements));
            let mut row = vec![spec.name.to_string().into(), r.n_elements.into(), fine.n_elements.into()];
            row.extend(param_cells(spec));
            row.extend([du.into(), de.into(), it.into()]);
            table.push(row);
        }
        ctx.write_table(&format!("{stem}_self_convergence.csv"), &table)?;
    }
    Ok(())
}

fn static_field_table(r: &RunReport) -> Table {
    let mut t = Table::new(&["x", "u_hat", "e_hat", "u_target", "e_target"]);
    let sol = &r.solution;
    for (k, &x) in sol.mesh.nodes().iter().enumerate() {
        let (ut, et) = match &r.target {
            Some(t) => (Some(t.u.eval(x)), Some(t.e.eval(x))),
            None => (None, None),
        };
        t.push(vec![
            x.into(),
            sol.u_nodal[k].into(),
            sol.e_nodal[k].into(),
            ut.into(),
            et.into(),
        ]);
    }
    t
}

/// `max |ê - e_eq|` per time slab, with the slab's mid time.
pub fn slab_deviation(report: &DynamicRunReport) -> Vec<(f64, f64)> {
    let mesh = &report.solution.mesh;
    let ts = mesh.ts();
    let mut dev = vec![0.0f64; mesh.nt()];
    for s in &report.solution.samples {
        let d = (s.e - report.equilibrium.eval(s.x)).abs();
        dev[s.element.1] = dev[s.element.1].max(d);
    }
    dev.into_iter()
        .enumerate()
        .map(|(j, d)| (0.5 * (ts[j] + ts[j + 1]), d))
        .collect()
}

fn run_dynamic(ctx: &mut Ctx, spec: &CaseSpec, nx: usize, nt: usize) -> Result<(), RunError> {
    let stem = case_stem(&spec.name);
    let report = cases::run_dynamic_case(spec, nx, nt, &ctx.config.newton)?;
    let lead = |extra: &[Cell]| -> Vec<Cell> {
        let mut v = vec![
            spec.name.to_string().into(),
            nx.into(),
            nt.into(),
            report.final_time.into(),
        ];
        v.extend(param_cells(spec));
        v.extend_from_slice(extra);
        v
    };
    let params = ["case", "nx", "nt", "T", "c_u", "c_e", "c_v", "rho0"];
    let with = |extra: &[&'static str]| -> Vec<&'static str> { params.iter().chain(extra).copied().collect() };

    let mut fields = Table::new(&["t", "x", "u_hat", "v_hat", "e_hat"]);
    for r in cases::dynamic_fields(&report)? {
        fields.push(vec![r.t.into(), r.x.into(), r.u.into(), r.v.into(), r.e.into()]);
    }
    ctx.write_table(&format!("{stem}_fields.csv"), &fields)?;

    let mut history = Table::new(&with(&["iteration", "residual"]));
    newton_rows(&mut history, &lead(&[]), &report.solution.newton);
    ctx.write_table(&format!("{stem}_newton.csv"), &history)?;

    let mut series = Table::new(&with(&["t", "max_deviation"]));
    for (t, d) in slab_deviation(&report) {
        series.push(lead(&[t.into(), d.into()]));
    }
    ctx.write_table(&format!("{stem}_dual_stability.csv"), &series)?;

    ctx.say(format!(
        "{}  ({nx} x {nt} space-time elements, T = {}, c_e = {}, c_v = {})",
        spec.name, report.final_time, spec.aux.c_e, spec.aux.c_v
    ));
    ctx.say(format!(
        "  dual: {} Newton iterations, final residual {:.3e}, max |e^ - e_eq| = {:.3e}",
        report.solution.newton.iterations,
        report.solution.newton.final_residual(),
        report.stability
    ));

    if spec.name == CaseName::PerturbedDynamic {
        let mut packets = Table::new(&with(&["centre", "grain_strain", "theory_speed", "left_speed", "right_speed"]));
        for c in BUMP_CENTRES {
            let sp = packet_speeds(&report, c, 3.0 * BUMP_HALF_WIDTH + 0.1);
            let e = report.equilibrium.eval(c);
            let theory = wave_speed(e, spec.aux.rho0);
            ctx.say(format!(
                "  packet at x = {c}: strain {e:.4}, speeds left {:.3} / right {:.3}, small-strain theory {theory:.3}",
                sp.left, sp.right
            ));
            packets.push(lead(&[c.into(), e.into(), theory.into(), sp.left.into(), sp.right.into()]));
        }
        ctx.write_table(&format!("{stem}_packets.csv"), &packets)?;
    }

    let dual_stable = report.stability < STABILITY_THRESHOLD;
    if !ctx.config.compare_primal {
        ctx.verdict(format!(
            "verdict {}: dual {} (max |e^ - e_eq| = {:.3e})",
            spec.name,
            if dual_stable { "stable" } else { "unstable" },
            report.stability
        ));
        return Ok(());
    }

    let primal = run_primal(&report, nx).map_err(|source| RunError::Primal {
        case: spec.name.to_string(),
        source,
    })?;
    let mut series = Table::new(&with(&["dt", "step", "t", "max_abs_strain", "max_deviation", "energy"]));
    for row in &primal.rows {
        series.push(lead(&[
            primal.dt.into(),
            row.step.into(),
            row.t.into(),
            row.max_abs_strain.into(),
            row.max_deviation.into(),
            row.energy.into(),
        ]));
    }
    ctx.write_table(&format!("{stem}_primal_stability.csv"), &series)?;
    let primal_text = match primal.blow_up_time {
        Some(t) => format!("blow-up at t = {t:.4e}"),
        None => format!(
            "no blow-up (max |e| = {:.3e}, max |e - e_eq| = {:.3e})",
            primal.max_abs_strain, primal.max_deviation
        ),
    };
    ctx.verdict(format!(
        "verdict {}: dual {} (max |e^ - e_eq| = {:.3e}); primal {}",
        spec.name,
        if dual_stable { "stable" } else { "unstable" },
        report.stability,
        primal_text
    ));
    Ok(())
}

/// One recorded primal state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimalRow {
    pub step: usize,
    pub t: f64,
    pub max_abs_strain: f64,
    pub max_deviation: f64,
    pub energy: f64,
}

/// Primal run over the dual window on `nx` elements.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalComparison {
    pub dt: f64,
    pub rows: Vec<PrimalRow>,
    pub blow_up_time: Option<f64>,
    pub max_abs_strain: f64,
    /// `max |e - e_eq|` over recorded states, with `e_eq` sampled at
    /// element midpoints.
    pub max_deviation: f64,
}

/// Integrates the primal equations from the dual run's initial data over
/// the same window, at the CFL step rounded down to divide the window.
pub fn run_primal(report: &DynamicRunReport, nx: usize) -> Result<PrimalComparison, PrimalError> {
    let mesh = Mesh1D::uniform(nx).expect("nx >= 1");
    let case = &report.data;
    let limit = primal::cfl_time_step(case, &mesh);
    let n_steps = (report.final_time / limit).ceil().max(1.0) as usize;
    let dt = report.final_time / n_steps as f64;
    let options = PrimalOptions {
        record_every: (n_steps / PRIMAL_RECORDS).max(1),
        ..Default::default()
    };
    let run = primal::evolve_primal_with(case, &mesh, dt, n_steps, &options)?;
    let mids: Vec<f64> = mesh
        .nodes()
        .windows(2)
        .map(|w| report.equilibrium.eval(0.5 * (w[0] + w[1])))
        .collect();
    let rows: Vec<PrimalRow> = run
        .states
        .iter()
        .map(|s| PrimalRow {
            step: s.step,
            t: s.t,
            max_abs_strain: s.max_abs_strain(),
            max_deviation: s.e.iter().zip(&mids).map(|(e, m)| (e - m).abs()).fold(0.0, f64::max),
            energy: primal::total_energy(&mesh, s, case.rho0),
        })
        .collect();
    Ok(PrimalComparison {
        dt,
        blow_up_time: run.blow_up_time,
        max_abs_strain: rows.iter().map(|r| r.max_abs_strain).fold(0.0, f64::max),
        max_deviation: rows.iter().map(|r| r.max_deviation).fold(0.0, f64::max),
        rows,
    })
}

fn run_convexity(ctx: &mut Ctx) -> Result<(), RunError> {
    let (samples, seed) = (ctx.config.samples, ctx.config.seed);
    let mut bounds: Option<Table> = None;
    let mut combos: Option<Table> = None;
    ctx.say(format!("convexity lab  ({samples} points per model, seed {seed})"));
    for model in DualModel::standard() {
        let b = bound_check(&model, samples, seed);
        let c = convexity_check(&model, samples, seed);
        let regimes: Vec<String> = b
            .by_regime()
            .iter()
            .map(|(r, n, v)| format!("{r}: {v}/{n}"))
            .collect();
        let upper = if b.upper_checked() > 0 {
            format!(", upper-bound violations {}/{}", b.upper_violations(), b.upper_checked())
        } else {
            String::new()
        };
        ctx.verdict(format!(
            "verdict {}: lower-bound violations {}/{} [{}]{}, witness above sup {}, convexity violations {}/{}",
            model.label(),
            b.lower_violations(),
            b.rows.len(),
            regimes.join(", "),
            upper,
            b.sandwich_violations(),
            c.violations(),
            c.rows.len()
        ));
        append(&mut bounds, b.table());
        append(&mut combos, c.table());
    }
    let inf = infinity_check(samples, seed);
    ctx.verdict(format!(
        "verdict neo_hookean_2d: +infinity flagged at {}/{} points with |s| > 1",
        inf.rows.len() - inf.missed(),
        inf.rows.len()
    ));
    ctx.write_table("convexity_bounds.csv", &bounds.expect("at least one model"))?;
    ctx.write_table("convexity_combinations.csv", &combos.expect("at least one model"))?;
    ctx.write_table("convexity_infinity.csv", &inf.table())?;
    Ok(())
}

fn append(acc: &mut Option<Table>, t: Table) {
    match acc {
        Some(a) => a.rows.extend(t.rows),
        None => *acc = Some(t),
    }
}

/// Reads every CSV in `dir` as `(name, bytes)`, sorted by name.
pub fn read_csvs(dir: &Path) -> std::io::Result<Vec<(String, Vec<u8>)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            out.push((name, fs::read(&path)?));
        }
    }
    out.sort();
    Ok(out)
}
