//! The six subcommands. Each writes its files under `<out>/<run_id>_*` and
//! prints a short human-readable summary.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use roadfield::analysis::{
    fit_decay, fit_speed, integral_balance, itot, peak_time_map, region_split, write_decay_csv,
    write_front_trace_csv, write_regions_csv, write_tau_csv, DecayRow, DecayWindow, FrontTrace,
    DEFAULT_TAIL_FRACTION,
};
use roadfield::pde::{
    front_level, init_state, run, snapshot_file_name, solve_steady, write_bulk_csv, write_road_csv, FieldState,
    Mode, SteadyOutcome, Trajectory,
};
use roadfield::{c_sirt, decay_exponents, omega_reduced, reduced_speed, ModelParams};

use crate::config::{axis_setter, RunConfig};
use crate::error::CliError;

/// Where one run writes its files.
pub struct Sink {
    dir: PathBuf,
    run_id: String,
}

impl Sink {
    /// Creates the directory and claims `run_id` in it.
    pub fn claim(dir: &Path, run_id: &str, overwrite: bool) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        let sink = Self { dir: dir.to_path_buf(), run_id: run_id.to_string() };
        if !overwrite && sink.path_raw(&format!("{run_id}.config.json")).exists() {
            return Err(CliError::RunIdTaken { run_id: run_id.into(), dir: dir.into() });
        }
        Ok(sink)
    }

    fn path_raw(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}_{suffix}", self.run_id))
    }

    fn create(&self, suffix: &str) -> Result<BufWriter<File>, CliError> {
        Ok(BufWriter::new(File::create(self.path(suffix))?))
    }

    /// `<run_id><tag>_t<time>.csv`
    fn create_snapshot(&self, tag: &str, t: f64) -> Result<BufWriter<File>, CliError> {
        let name = snapshot_file_name(&format!("{}{tag}", self.run_id), t);
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    pub fn echo_config(&self, config: &RunConfig) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(config).expect("config serialises");
        fs::write(self.path_raw(&format!("{}.config.json", self.run_id)), text + "\n")?;
        Ok(())
    }
}

/// `quantity = value` lines, printed and saved as `<run_id>_summary.txt`.
#[derive(Default)]
pub struct Summary {
    lines: Vec<String>,
}

impl Summary {
    fn num(&mut self, quantity: &str, value: f64) {
        self.lines.push(format!("{quantity} = {value:.10}"));
    }

    fn text(&mut self, quantity: &str, value: impl std::fmt::Display) {
        self.lines.push(format!("{quantity} = {value}"));
    }

    fn finish(self, sink: &Sink) -> Result<(), CliError> {
        let mut w = sink.create("summary.txt")?;
        for l in &self.lines {
            writeln!(w, "{l}")?;
        }
        w.flush()?;
        print_lines(self.lines.iter())
    }
}

/// Prints to stdout, treating a closed pipe as the reader losing interest.
fn print_lines<T: std::fmt::Display>(lines: impl Iterator<Item = T>) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    for l in lines {
        match writeln!(out, "{l}") {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => return Ok(()),
            r => r?,
        }
    }
    Ok(())
}

/// The configuration spelling of `mode`.
fn mode_name(mode: Mode) -> String {
    serde_json::to_value(mode).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

/// Named scalar results of the algebraic solvers for one parameter set.
pub fn speed_table(p: &ModelParams) -> Result<Vec<(&'static str, f64)>, CliError> {
    let r = p.reduce()?;
    let tri = decay_exponents(p)?;
    let mut rows = vec![("R0", r.r0)];
    if let (Some(w_sir), Some(lambda), Some(rho)) = (r.w_sir, r.lambda, r.rho) {
        let c_sir = p.c_sir()?;
        let c_t = c_sirt(p)?;
        let v_star = p.v_star()?;
        rows.extend([
            ("c_SIR", c_sir),
            ("c_SIR^T", c_t),
            ("c_SIR^T/c_SIR", c_t / c_sir),
            ("v_*", v_star),
            ("I_tot limit", p.infected_total(v_star)),
        ]);
        rows.extend([("a_*", tri.a), ("b_*", tri.b), ("gamma_*", tri.gamma)]);
        rows.extend([
            ("D/d", r.dd),
            ("lambda", lambda),
            ("rho", rho),
            ("w_SIR", w_sir),
            ("w_bar", reduced_speed(lambda, rho, r.dd)?),
            ("omega(lambda)", omega_reduced(lambda)?),
        ]);
    } else {
        rows.extend([("a_*", tri.a), ("b_*", tri.b), ("gamma_*", tri.gamma), ("D/d", r.dd)]);
    }
    Ok(rows)
}

pub fn cmd_speed(config: &RunConfig, sink: &Sink) -> Result<(), CliError> {
    let p = &config.params;
    let rows = speed_table(p)?;
    let mut w = sink.create("speed.csv")?;
    writeln!(w, "quantity,value")?;
    for (q, v) in &rows {
        writeln!(w, "{q},{v:.16e}")?;
    }
    w.flush()?;
    let mut s = Summary::default();
    if p.r0() <= 1.0 {
        s.text("outcome", format!("no spreading: R0 = {:.6} <= 1, the epidemic does not propagate", p.r0()));
    } else if p.road_d <= 2.0 * p.d {
        s.text("outcome", "D <= 2d: the road does not speed up propagation (c_SIR^T = c_SIR)");
    } else {
        s.text("outcome", "D > 2d: propagation along the road is faster (c_SIR^T > c_SIR)");
    }
    for (q, v) in rows {
        s.num(q, v);
    }
    s.finish(sink)
}

fn write_snapshots(traj: &Trajectory, sink: &Sink) -> Result<(), CliError> {
    let grid = traj.grid;
    for snap in &traj.snapshots {
        write_bulk_csv(sink.create_snapshot("", snap.t)?, &grid, &snap.bulk)?;
        if !snap.road.is_empty() {
            write_road_csv(sink.create_snapshot("_road", snap.t)?, &grid, &snap.road)?;
        }
        if !snap.susceptible.is_empty() {
            write_bulk_csv(sink.create_snapshot("_S", snap.t)?, &grid, &snap.susceptible)?;
        }
    }
    Ok(())
}

/// Predicted front speed and the name of the quantity it stands for.
fn predicted_speed(mode: Mode, p: &ModelParams) -> Option<(&'static str, f64)> {
    if p.r0() <= 1.0 {
        return None;
    }
    if mode.has_road() {
        c_sirt(p).ok().map(|c| ("c_SIR^T", c))
    } else {
        p.c_sir().ok().map(|c| ("c_SIR", c))
    }
}

/// Front trace along `y = 0` and the fitted speed, if enough samples.
pub fn measure_speed(traj: &Trajectory, p: &ModelParams) -> Result<(FrontTrace, Option<f64>), CliError> {
    let Some(level) = front_level(traj.mode, p) else {
        return Ok((FrontTrace::new(Vec::new(), Vec::new())?, None));
    };
    let xs = traj.grid.xs();
    let trace = FrontTrace::from_profiles(&traj.trace_times, traj.wall_trace.iter().map(Vec::as_slice), &xs, level)?;
    let speed = fit_speed(&trace, DEFAULT_TAIL_FRACTION).ok().map(|f| f.slope);
    Ok((trace, speed))
}

pub fn cmd_simulate(config: &RunConfig, sink: &Sink) -> Result<(), CliError> {
    let p = &config.params;
    let state = init_state(config.grid, config.mode, &config.sources.i0, &config.sources.t0, p)?;
    let traj = run(state, p, config.time.run_options())?;
    write_snapshots(&traj, sink)?;
    let (trace, speed) = measure_speed(&traj, p)?;
    write_front_trace_csv(sink.create("front_trace.csv")?, &trace)?;

    let mut s = Summary::default();
    s.text("mode", mode_name(config.mode));
    s.num("t_end", traj.final_state.t);
    s.num("dt", traj.dt);
    s.text("snapshots", traj.snapshots.len());
    s.text("front samples", trace.len());
    match speed {
        Some(v) => s.num("measured front speed", v),
        None => s.text("measured front speed", "unavailable (too few front samples)"),
    }
    if let Some((name, c)) = predicted_speed(config.mode, p) {
        s.num(&format!("predicted speed {name}"), c);
        if let Some(v) = speed {
            s.num(&format!("relative error vs {name}"), (v - c) / c);
        }
    } else {
        s.text("predicted speed", "none: R0 <= 1, no spreading");
    }
    if config.mode == Mode::RoadfieldUv && p.r0() > 1.0 {
        let v_star = p.v_star()?;
        let tau = peak_time_map(&traj.trace_times, &traj.wall_trace, v_star);
        write_tau_csv(sink.create("tau_star.csv")?, &traj.grid.xs(), &tau)?;
        s.text("tau_* crossed nodes", tau.iter().filter(|t| t.is_some()).count());
    }
    s.text("boundary warning", traj.boundary_warning);
    s.finish(sink)
}

fn check_steady_mode(mode: Mode) -> Result<(), CliError> {
    if mode.is_direct() {
        return Err(CliError::Config {
            path: "mode".into(),
            reason: "steady needs scalar_v or roadfield_uv".into(),
        });
    }
    Ok(())
}

fn steady_of(config: &RunConfig, mode: Mode) -> Result<SteadyOutcome, CliError> {
    let p = &config.params;
    let st = init_state(config.grid, mode, &config.sources.i0, &config.sources.t0, p)?;
    Ok(solve_steady(st, p, config.steady.tol, config.steady.t_max)?)
}

/// Worst relative deviation from `target` on the outer 10 % x-band at mid-height.
fn far_field_error(st: &FieldState, target: f64) -> f64 {
    let g = st.grid;
    let (nx, band, mid) = (g.nx(), (g.nx() / 10).max(1), g.j_of(g.ly / 2.0));
    (0..band).chain(nx - band..nx).map(|i| (st.at(i, mid) / target - 1.0).abs()).fold(0.0, f64::max)
}

pub fn cmd_steady(config: &RunConfig, sink: &Sink) -> Result<(), CliError> {
    check_steady_mode(config.mode)?;
    let p = &config.params;
    let out = steady_of(config, config.mode)?;
    let st = &out.state;
    write_bulk_csv(sink.create("steady.csv")?, &st.grid, &st.bulk)?;
    if !st.road.is_empty() {
        write_road_csv(sink.create("steady_road.csv")?, &st.grid, &st.road)?;
    }
    write_bulk_csv(sink.create("itot.csv")?, &st.grid, &itot(&st.bulk, p))?;

    let mut s = Summary::default();
    s.text("mode", mode_name(config.mode));
    s.text("converged", out.converged);
    s.num("residual", out.residual);
    s.num("time", st.t);
    let v_star = p.plateau()?;
    if v_star > 0.0 {
        s.num("v_*", v_star);
        s.num("far-field relative error vs v_*", far_field_error(st, v_star));
        s.num("I_tot limit S0(1 - exp(-beta v_*))", p.infected_total(v_star));
        let (label, row, reference) = if config.mode.has_road() {
            ("a_* along y = 0", st.row(0), decay_exponents(p)?.a)
        } else {
            let kappa = (-p.f_prime(v_star)? / p.d).sqrt();
            ("sqrt(-f'(v_*)/d) at mid-height", st.row(st.grid.j_of(st.grid.ly / 2.0)), kappa)
        };
        match fit_decay(&st.grid.xs(), row, v_star, DecayWindow::Auto) {
            Ok(fit) => {
                s.num(&format!("decay rate fit ({label})"), fit.rate);
                s.num("decay rate reference", reference);
                write_decay_csv(sink.create("decay_fit.csv")?, &[DecayRow { label: label.into(), fit, reference }])?;
            }
            Err(e) => s.text("decay rate fit", format!("unavailable ({e})")),
        }
    } else {
        let max = st.bulk.iter().copied().fold(0.0, f64::max);
        s.text("v_*", "none (R0 <= 1): steady state decays to 0");
        s.num("max v", max);
    }
    let converged = out.converged;
    let residual = out.residual;
    s.finish(sink)?;
    if !converged {
        return Err(CliError::NotConverged(format!("residual {residual:.3e}")));
    }
    Ok(())
}

pub fn cmd_compare(config: &RunConfig, sink: &Sink) -> Result<(), CliError> {
    let p = &config.params;
    if p.r0() == 1.0 {
        return Err(CliError::Config { path: "params".into(), reason: "compare needs R0 != 1".into() });
    }
    let road = steady_of(config, Mode::RoadfieldUv)?;
    let plain = steady_of(config, Mode::ScalarV)?;
    let v_star = p.plateau()?;
    let scale = if v_star > 0.0 { v_star } else { plain.state.bulk.iter().copied().fold(0.0, f64::max) };
    let tol = config.compare.rel_tol * scale;
    let report = region_split(&road.state, &plain.state, tol)?;
    let grid = road.state.grid;
    write_regions_csv(sink.create("regions.csv")?, &grid, &report)?;
    write_bulk_csv(sink.create("itot_road.csv")?, &grid, &itot(&road.state.bulk, p))?;
    write_bulk_csv(sink.create("itot_plain.csv")?, &grid, &itot(&plain.state.bulk, p))?;

    let mut s = Summary::default();
    s.text("converged (road, no road)", format!("{}, {}", road.converged, plain.converged));
    s.text("residuals (road, no road)", format!("{:.3e}, {:.3e}", road.residual, plain.residual));
    if !(road.converged && plain.converged) {
        s.finish(sink)?;
        return Err(CliError::NotConverged(format!(
            "road residual {:.3e}, no-road residual {:.3e}",
            road.residual, plain.residual
        )));
    }
    s.num("region tolerance", tol);
    s.num("E+ area (road raises I_tot)", report.e_plus_area);
    s.num("E- area (road lowers I_tot)", report.e_minus_area);
    s.text("E+ bounding box [x0, x1, y0, y1]", format!("{:?}", report.e_plus_bbox));
    s.text("E- bounding box [x0, x1, y0, y1]", format!("{:?}", report.e_minus_bbox));
    let balance = integral_balance(&road, p, &config.sources.i0)?;
    s.num("integral balance, bulk residual", balance.bulk_residual);
    s.num("integral balance, road residual", balance.road_residual);
    if v_star > 0.0 {
        let limit = p.infected_total(v_star);
        s.num("I_tot limit S0(1 - exp(-beta v_*))", limit);
        for (name, st) in [("road", &road.state), ("no road", &plain.state)] {
            let worst = far_field_error(st, v_star);
            let g = st.grid;
            let i_far = itot(&[st.at(0, g.j_of(g.ly / 2.0))], p)[0];
            s.num(&format!("I_tot far field ({name})"), i_far);
            s.num(&format!("far-field relative error vs v_* ({name})"), worst);
        }
    }
    s.finish(sink)
}

/// Worker count for sweeps: `ROADFIELD_THREADS` if set, else the machine's.
fn sweep_threads() -> usize {
    std::env::var("ROADFIELD_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `job` on every index using up to `threads` workers; results come
/// back in index order.
fn run_ordered<T: Send>(n: usize, threads: usize, job: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads.min(n).max(1) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= n {
                    break;
                }
                let out = job(k);
                slots.lock().unwrap()[k] = Some(out);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|s| s.expect("every index ran")).collect()
}

pub fn cmd_sweep(config: &RunConfig, sink: &Sink) -> Result<(), CliError> {
    let Some(sweep) = &config.sweep else {
        return Err(CliError::Config { path: "sweep".into(), reason: "missing sweep section".into() });
    };
    let set = axis_setter(&sweep.axis).map_err(|reason| CliError::Config { path: "sweep.axis".into(), reason })?;
    let mut entries = Vec::with_capacity(sweep.values.len());
    for (k, &v) in sweep.values.iter().enumerate() {
        let mut p = config.params;
        let path = format!("sweep.values[{k}]");
        set(&mut p, v).map_err(|reason| CliError::Config { path: path.clone(), reason })?;
        p.validate().map_err(|e| CliError::Config { path, reason: e.to_string() })?;
        entries.push(p);
    }

    let results = run_ordered(entries.len(), sweep_threads(), |k| -> Result<_, CliError> {
        let p = &entries[k];
        let mut rows: Vec<(&'static str, f64)> = speed_table(p)?;
        if sweep.simulate {
            let state = init_state(config.grid, config.mode, &config.sources.i0, &config.sources.t0, p)?;
            let traj = run(state, p, config.time.run_options())?;
            if let (_, Some(v)) = measure_speed(&traj, p)? {
                rows.push(("measured front speed", v));
            }
        }
        Ok(rows)
    });

    let mut w = sink.create("sweep.csv")?;
    writeln!(w, "index,axis,value,quantity,result")?;
    for (k, res) in results.into_iter().enumerate() {
        let value = sweep.values[k];
        for (q, r) in res? {
            writeln!(w, "{k},{},{value:.16e},{q},{r:.16e}", sweep.axis)?;
        }
    }
    w.flush()?;
    let mut s = Summary::default();
    s.text("axis", &sweep.axis);
    s.text("entries", sweep.values.len());
    s.text("table", sink.path("sweep.csv").display());
    s.finish(sink)
}

pub fn cmd_omega(config: &RunConfig, sink: &Sink) -> Result<(), CliError> {
    let om = &config.omega;
    let mut w = sink.create("omega.csv")?;
    writeln!(w, "lambda,omega,reduced_speed,relative_gap")?;
    let mut table = vec![format!("{:>10} {:>14} {:>14}", "lambda", "omega", format!("w(D={:.0e})", om.dd))];
    for &l in &om.lambdas {
        let o = omega_reduced(l)?;
        let r = reduced_speed(l, om.rho, om.dd)?;
        writeln!(w, "{l:.16e},{o:.16e},{r:.16e},{:.16e}", (r - o) / o)?;
        table.push(format!("{l:>10.4} {o:>14.10} {r:>14.10}"));
    }
    w.flush()?;
    print_lines(table.iter())?;
    let mut s = Summary::default();
    s.text("reduced speed limit curve omega(lambda)", sink.path("omega.csv").display());
    s.num("companion D/d", om.dd);
    s.num("companion rho", om.rho);
    s.finish(sink)
}
