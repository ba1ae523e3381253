//! One function per subcommand. Each writes its artifacts into `out`, adds
//! summary entries, and returns the reason when aborted or escaping orbits
//! dominate the run.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::sync::Arc;

use bohmchaos::basis::{build_hamiltonian, unperturbed_spectrum};
use bohmchaos::bohm::{
    born_sample, chaotic_fraction_curve, classify_by_stretching, classify_trajectory, deformation_time,
    envelope_slope, lyapunov_series, node_passage_time, occupancy, run_ensemble_with, shadow_bohmian, DeviationState, ErgodicReference,
    Method, OccupancyHistogram, ShadowRun, DEFAULT_BIN, DEFORMATION_REGION, DEFORMATION_THRESHOLD,
};
use bohmchaos::classical::{
    central_periodic_orbit, chaotic_area_fraction, czv, escape_perturbation, poincare_section, rotation_curve,
    saddle_energy, scan_line, ClassicalState, CentralOrbit,
};
use bohmchaos::field::{deformation, density_heatmap};
use bohmchaos::grid::{Grid, Rect};
use bohmchaos::io::{fmt_f64, CsvWriter};
use bohmchaos::nodes::find_nodes;
use bohmchaos::spectral::SpectralModel;
use bohmchaos::state::Propagator;
use bohmchaos::OscillatorParams;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::output::{finite, Outputs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Perturbed eigenvalues and the unperturbed basis.
    Spectrum,
    /// Level probabilities |q_m(t)|² over time.
    Levels,
    /// Average energy E_av(t) and its time average.
    Eav,
    /// |Ψ|² heatmaps at the configured times.
    Density,
    /// Nodal-point tracks and their visit colorplot.
    Nodes,
    /// One Bohmian trajectory with stretching numbers and verdicts.
    Bohm,
    /// Chaotic fraction of a Born-distributed ensemble over time.
    Fraction,
    /// Density-deformation and node-passage times across perturbations.
    Tc,
    /// Classical Poincaré section (y = 0, ẏ > 0).
    Section,
    /// Curves of zero velocity and the escape perturbation.
    Czv,
    /// Rotation numbers along the section line ẋ = 0.
    Rn,
    /// Chaotic fraction of the allowed section area.
    Area,
    /// Finite-time Lyapunov characteristic number of a Bohmian trajectory.
    Lcn,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Levels => "levels",
            Command::Eav => "eav",
            Command::Density => "density",
            Command::Nodes => "nodes",
            Command::Bohm => "bohm",
            Command::Fraction => "fraction",
            Command::Tc => "tc",
            Command::Section => "section",
            Command::Czv => "czv",
            Command::Rn => "rn",
            Command::Area => "area",
            Command::Lcn => "lcn",
        }
    }
}

pub type Dominated = Option<String>;

pub fn run(cmd: Command, cfg: &ExperimentConfig, out: &mut Outputs) -> CliResult<Dominated> {
    match cmd {
        Command::Spectrum => spectrum(cfg, out),
        Command::Levels => levels(cfg, out),
        Command::Eav => eav(cfg, out),
        Command::Density => density(cfg, out),
        Command::Nodes => nodes(cfg, out),
        Command::Bohm => bohm(cfg, out),
        Command::Fraction => fraction(cfg, out),
        Command::Tc => tc(cfg, out),
        Command::Section => section(cfg, out),
        Command::Czv => zero_velocity(cfg, out),
        Command::Rn => rn(cfg, out),
        Command::Area => area(cfg, out),
        Command::Lcn => lcn(cfg, out),
    }
}

fn propagator_at(cfg: &ExperimentConfig, params: &OscillatorParams) -> CliResult<Propagator> {
    let model = Arc::new(SpectralModel::solve(cfg.cutoff, params)?);
    Ok(Propagator::from_state(model, &cfg.state)?)
}

fn propagator(cfg: &ExperimentConfig) -> CliResult<Propagator> {
    propagator_at(cfg, &cfg.params)
}

/// Configured classical energy, else the quantum time-averaged `E_av`.
fn energy_at(cfg: &ExperimentConfig, params: &OscillatorParams) -> CliResult<f64> {
    match cfg.run.energy {
        Some(e) => Ok(e),
        None => Ok(propagator_at(cfg, params)?.mean_average_energy(cfg.run.energy_horizon)),
    }
}

fn sample_times(t_end: f64, dt: f64) -> Vec<f64> {
    let n = (t_end / dt + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 * dt).collect()
}

fn epsilons(cfg: &ExperimentConfig) -> Vec<f64> {
    if cfg.run.epsilons.is_empty() {
        vec![cfg.params.epsilon]
    } else {
        cfg.run.epsilons.clone()
    }
}

fn flag(b: bool) -> String {
    u8::from(b).to_string()
}

fn spectrum(cfg: &ExperimentConfig, out: &mut Outputs) -> CliResult<Dominated> {
    let model = SpectralModel::solve(cfg.cutoff, &cfg.params)?;
    let basis = model.basis();
    let mut w = out.csv("spectrum.csv", &["index", "energy"])?;
    for (k, e) in model.eigenvalues.iter().enumerate() {
        w.raw_row(&[k.to_string(), fmt_f64(*e)])?;
    }
    w.finish()?;
    let e0 = unperturbed_spectrum(&basis, &cfg.params);
    let mut w = out.csv("basis.csv", &["index", "nx", "ny", "unperturbed_energy"])?;
    for (k, (d, e)) in basis.pairs().iter().zip(&e0).enumerate() {
        w.raw_row(&[k.to_string(), d.nx.to_string(), d.ny.to_string(), fmt_f64(*e)])?;
    }
    w.finish()?;
    let mut f = out.file("model.bin")?;
    model.write_binary(&mut f)?;
    f.flush()?;
    let h = build_hamiltonian(&basis, &cfg.params);
    out.note("dim", model.dim());
    out.note("orthonormality_error", model.orthonormality_error());
    out.note("reconstruction_error", model.reconstruction_error(&h));
    out.note("ground_energy", model.eigenvalues.first().copied());
    Ok(None)
}

fn levels(cfg: &ExperimentConfig, out: &mut Outputs) -> CliResult<Dominated> {
    let prop = propagator(cfg)?;
    let basis = prop.model().basis();
    let names: Vec<String> = std::iter::once("t".to_string())
        .chain(basis.pairs().iter().map(|d| format!("p_{}_{}", d.nx, d.ny)))
        .collect();
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut w = out.csv("levels.csv", &header)?;
    let (mut top, mut top_max, mut count) = (0.0, 0.0f64, 0usize);
    let mut row = Vec::with_capacity(names.len());
    for t in sample_times(cfg.t_end.unwrap_or(100.0), cfg.run.sample_dt) {
        let s = prop.evolve(t);
        row.clear();
        row.push(t);
        row.extend(s.coefficients.iter().map(|c| c.norm_sqr()));
        w.row(&row)?;
        let p = s.shell_occupation(cfg.cutoff);
        top += p;
        top_max = top_max.max(p);
        count += 1;
    }
    w.finish()?;
    out.note("samples", count);
    out.note("top_shell_mean", top / count as f64);
    out.note("top_level_mean", top / count as f64 / (cfg.cutoff + 1) as f64);
    out.note("top_shell_max", top_max);
    Ok(None)
}

fn eav(cfg: &ExperimentConfig, out: &mut Outputs) -> CliResult<Dominated> {
    let prop = propagator(cfg)?;
    let h = build_hamiltonian(&prop.model().basis(), &cfg.params);
    let t_end = cfg.t_end.unwrap_or(cfg.run.energy_horizon);
    let mut w = out.csv("eav.csv", &["t", "e_av", "energy"])?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut e0 = None;
    let mut drift = 0.0f64;
    for t in sample_times(t_end, cfg.run.sample_dt) {
        let s = prop.evolve(t);
        let (e_av, _) = bohmchaos::state::average_energy(&s);
        let e = s.energy_expectation(&h);
        let e_ref = *e0.get_or_insert(e);
        drift = drift.max((e - e_ref).abs());
        lo = lo.min(e_av);
        hi = hi.max(e_av);
        w.row(&[t, e_av, e])?;
    }
    w.finish()?;
    out.note("time_average", prop.mean_average_energy(t_end));
    out.note("horizon", t_end);
    out.note("e_av_min", lo);
    out.note("e_av_max", hi);
    out.note("energy", e0);
    out.note("energy_drift", drift);
    Ok(None)
}

fn density(cfg: &ExperimentConfig, out: &mut Outputs) -> CliResult<Dominated> {
    let prop = propagator(cfg)?;
    let region = Rect::square(cfg.run.region);
    let mut frames = Vec::new();
    for (k, &t) in cfg.run.times.iter().enumerate() {
        let g = density_heatmap(&prop.evolve(t), region, cfg.run.resolution)?;
        out.heatmap(&format!("density_{k:03}"), &g, cfg.run.pgm)?;
        let d = deformation(&prop, t, DEFORMATION_REGION, 120)?;
        frames.push(json!({ "t": t, "peak": g.max_value(), "deformation": finite(d) }));
    }
    out.note("frames", frames);
    Ok(None)
}

fn nodes(cfg: &ExperimentConfig, out: &mut Outputs) -> CliResult<Dominated> {
    let prop = propagator(cfg)?;
    let region = Rect::square(cfg.run.region);
    let mut visits = OccupancyHistogram::new(region, DEFAULT_BIN)?;
    let mut w = out.csv("nodes.csv", &["t", "x", "y", "residual"])?;
    let (mut frames, mut total, mut dropped) = (0usize, 0usize, 0usize);
    let mut worst = 0.0f64;
    for t in sample_times(cfg.t_end.unwrap_or(100.0), cfg.run.node_dt) {
        let set = find_nodes(&prop.evolve(t), region, cfg.run.node_step)?;
        for n in &set.nodes {
            w.row(&[t, n.x, n.y, n.residual])?;
            visits.add(n.x, n.y);
            worst = worst.max(n.residual);
        }
        frames += 1;
        total += set.nodes.len();
        dropped += set.dropped;
    }
    w.finish()?;
    out.heatmap("node_visits", &visits.to_grid(), cfg.run.pgm)?;
    out.note("frames", frames);
    out.note("nodes", total);
    out.note("dropped", dropped);
    out.note("max_residual", worst);
    Ok(None)
}

fn write_trajectory<W: Write>(run: &ShadowRun, w: W) -> bohmchaos::Result<()> {
    let mut c = CsvWriter::new(w, &["t", "x", "y"])?;
    for s in &run.record.samples {
        c.row(s)?;
    }
    c.finish()?;
    Ok(())
}

fn write_deviation(out: &mut Outputs, name: &str, dev: &DeviationState) -> CliResult<()> {
    let mut w = out.csv(name, &["t", "xi", "alpha", "chi"])?;
    for k in 0..dev.len() {
        w.row(&[dev.times[k], dev.xi[k], dev.stretchings[k], dev.chi[k]])?;
    }
    w.finish()?;
    Ok(())
}

fn bohm(cfg: &ExperimentConfig, out: &mut Outputs) -> CliResult<Dominated> {
    let prop = propagator(cfg)?;
    let t_end = cfg.t_end.unwrap_or(2000.0);
    let run = shadow_bohmian(&prop, cfg.run.start, t_end, cfg.run.renormalization, cfg.run.cadence, &cfg.integrator)?;
    write_trajectory(&run, out.file("trajectory.csv")?)?;
    write_deviation(out, "chi.csv", &run.deviation)?;
    let reference = ErgodicReference::build(&prop, &cfg.classifier, t_end)?;
    let colorplot = classify_trajectory(&run.record, &reference, &cfg.classifier)?;
    let stretching = classify_by_stretching(&run.deviation, &cfg.classifier);
    out.json("verdicts.json", &json!({ "colorplot": colorplot, "stretching": stretching }))?;
    if !run.record.samples.is_empty() {
        let h = occupancy(&run.record, Rect::square(cfg.run.region), DEFAULT_BIN)?;
        out.heatmap("occupancy", &h.to_grid(), cfg.run.pgm)?;
    }
    let r = &run.record;
    out.note("end_time", r.end_time());
    out.note("accepted_steps", r.accepted_steps);
    out.note("rejected_steps", r.rejected_steps);
    out.note("min_density_seen", r.min_density_seen);
    out.note("colorplot_onset", colorplot.onset_time);
    out.note("stretching_onset", stretching.onset_time);
    out.note("stretching_entry", stretching.entry_time);
    out.note("final_chi", run.deviation.last_chi());
    Ok(r.abort.as_ref().map(|a| format!("trajectory aborted at t = {}: {}", a.t, a.reason)))
}

fn fraction(cfg: &ExperimentConfig, out: &mut Outputs) -> CliResult<Dominated> {
    let prop = propagator(cfg)?;
    let t_end = cfg.t_end.unwrap_or(300.0);
    let initials = born_sample(&prop.evolve(0.0), cfg.run.ensemble, cfg.seed)?;
    let mut w = out.csv("initials.csv", &["index", "x", "y"])?;
    for (k, p) in initials.iter().enumerate() {
        w.raw_row(&[k.to_string(), fmt_f64(p[0]), fmt_f64(p[1])])?;
    }
    w.finish()?;
    let name = |k: usize| format!("trajectories/traj_{k:04}.csv");
    let dir = out.dir().to_path_buf();
    std::fs::create_dir_all(dir.join("trajectories"))?;
    let sink = |k: usize, run: &ShadowRun| -> bohmchaos::Result<()> {
        write_trajectory(run, BufWriter::new(File::create(dir.join(name(k)))?))
    };
    let members = run_ensemble_with(&prop, &initials, t_end, &cfg.integrator, &cfg.classifier, &sink)?;
    out.artifacts.extend((0..initials.len()).map(name));
    let times = sample_times(t_end, cfg.run.fraction_step);
    let cp = chaotic_fraction_curve(&members, Method::Colorplot, &times);
    let ly = chaotic_fraction_curve(&members, Method::Lyapunov, &times);
    let mut w = out.csv(
        "fraction.csv",
        &["t", "colorplot", "colorplot_lower", "colorplot_upper", "lyapunov", "lyapunov_lower", "lyapunov_upper"],
    )?;
    for (a, b) in cp.iter().zip(&ly) {
        w.row(&[a.t, a.fraction, a.lower, a.upper, b.fraction, b.lower, b.upper])?;
    }
    w.finish()?;
    out.json("verdicts.json", &members)?;
    let aborted = members.iter().filter(|m| m.abort.is_some()).count();
    out.note("ensemble", members.len());
    out.note("aborted", aborted);
    out.note("colorplot_final", cp.last().map(|p| p.fraction));
    out.note("lyapunov_final", ly.last().map(|p| p.fraction));
    out.note("borderline", members.iter().filter(|m| m.colorplot.borderline).count());
    Ok((2 * aborted > members.len()).then(|| format!("{aborted} of {} trajectories aborted", members.len())))
}

fn tc(cfg: &ExperimentConfig, out: &mut Outputs) -> CliResult<Dominated> {
    let mut w = out.csv("tc.csv", &["epsilon", "t_c", "t_node"])?;
    let mut rows = Vec::new();
    for eps in epsilons(cfg) {
        let prop = propagator_at(cfg, &cfg.with_epsilon(eps))?;
        let t = deformation_time(&prop, cfg.run.tc_dt, cfg.run.tc_max, DEFORMATION_THRESHOLD)?;
        let node = node_passage_time(&prop, cfg.run.tc_dt, cfg.run.tc_max)?;
        w.row(&[eps, t.unwrap_or(f64::NAN), node.unwrap_or(f64::NAN)])?;
        rows.push(json!({ "epsilon": eps, "t_c": t, "t_node": node }));
    }
    w.finish()?;
    out.note("t_c", rows);
    Ok(None)
}

fn note_center(out: &mut Outputs, c: &CliResult<CentralOrbit>) {
    match c {
        Ok(c) => out.note("central_orbit", c),
        Err(e) => out.note("central_orbit_error", e.to_string()),
    }
}

fn section_t_max(params: &OscillatorParams, crossings: usize) -> f64 {
    20.0 * std::f64::consts::TAU / params.omega_x.min(params.omega_y) * crossings as f64
}

fn section(cfg: &ExperimentConfig, out: &mut Outputs) -> CliResult<Dominated> {
    let p = &cfg.params;
    let e = energy_at(cfg, p)?;
    let center = central_periodic_orbit(p, e, &cfg.classical).map_err(Into::into);
    note_center(out, &center);
    let xs = scan_line(p, e, cfg.run.orbits);
    let mut pts = out.csv("section.csv", &["orbit", "x", "px", "t"])?;
    let mut orbits = out.csv("orbits.csv", &["orbit", "x0", "crossings", "escaped_at", "complete"])?;
    let (mut escaped, mut residual) = (0usize, 0.0f64);
    for (k, &x0) in xs.iter().enumerate() {
        let start = ClassicalState::on_section(p, e, x0, 0.0)?;
        let run = poincare_section(p, start, cfg.run.crossings, section_t_max(p, cfg.run.crossings), &cfg.classical)?;
        for q in &run.points {
            pts.raw_row(&[k.to_string(), fmt_f64(q.x), fmt_f64(q.px), fmt_f64(q.t)])?;
        }
        orbits.raw_row(&[
            k.to_string(),
            fmt_f64(x0),
            run.points.len().to_string(),
            fmt_f64(run.escaped.unwrap_or(f64::NAN)),
            flag(run.complete),
        ])?;
        escaped += usize::from(run.escaped.is_some());
        residual = residual.max(run.max_residual);
    }
    pts.finish()?;
    orbits.finish()?;
    out.note("energy", e);
    out.note("orbits", xs.len());
    out.note("escaped", escaped);
    out.note("max_residual", residual);
    Ok((2 * escaped > xs.len()).then(|| format!("{escaped} of {} orbits escaped", xs.len())))
}

fn zero_velocity(cfg: &ExperimentConfig, out: &mut Outputs) -> CliResult<Dominated> {
    let mut pts = out.csv("czv.csv", &["epsilon", "x", "y"])?;
    let mut curves = out.csv("curves.csv", &["epsilon", "energy", "saddle_energy", "open"])?;
    let mut any_open = false;
    for eps in epsilons(cfg) {
        let p = cfg.with_epsilon(eps);
        let e = energy_at(cfg, &p)?;
        let c = czv(&p, e, cfg.run.czv_samples)?;
        for q in &c.points {
            pts.row(&[eps, q[0], q[1]])?;
        }
        curves.raw_row(&[fmt_f64(eps), fmt_f64(e), fmt_f64(saddle_energy(&p)), flag(c.open)])?;
        any_open |= c.open;
    }
    pts.finish()?;
    curves.finish()?;
    out.note("any_open", any_open);
    if cfg.run.escape {
        let [lo, hi] = cfg.run.escape_range;
        let energy_of = |eps: f64| -> bohmchaos::Result<f64> {
            energy_at(cfg, &cfg.with_epsilon(eps)).map_err(|e| match e {
                crate::error::CliError::Numerical(n) => n,
                other => bohmchaos::Error::Format(other.to_string()),
            })
        };
        let eps = escape_perturbation(&cfg.params, energy_of, lo, hi, 1e-5)?;
        out.note("escape_epsilon", eps);
    }
    Ok(None)
}

fn rn(cfg: &ExperimentConfig, out: &mut Outputs) -> CliResult<Dominated> {
    let p = &cfg.params;
    let e = energy_at(cfg, p)?;
    let center = central_periodic_orbit(p, e, &cfg.classical)?;
    let xs = scan_line(p, e, cfg.run.scan_points);
    let curve = rotation_curve(p, e, &center, &xs, &cfg.rotation, &cfg.classical)?;
    let mut w = out.csv("rn.csv", &["x0", "rn", "spread", "chaotic", "escaped", "crossings"])?;
    for s in &curve.samples {
        w.raw_row(&[
            fmt_f64(s.x0),
            fmt_f64(s.rn),
            fmt_f64(s.spread),
            flag(s.chaotic),
            flag(s.escaped),
            s.crossings.to_string(),
        ])?;
    }
    w.finish()?;
    let regular: Vec<f64> = curve.samples.iter().filter(|s| s.regular()).map(|s| s.rn).collect();
    let escaped = curve.samples.iter().filter(|s| s.escaped).count();
    out.note("energy", e);
    out.note("central_orbit", center);
    out.note("regular", regular.len());
    out.note("escaped", escaped);
    out.note("rn_max", regular.iter().copied().reduce(f64::max));
    out.note("rn_min", regular.iter().copied().reduce(f64::min));
    let n = curve.samples.len();
    Ok((2 * escaped > n).then(|| format!("{escaped} of {n} scan orbits escaped")))
}

fn area(cfg: &ExperimentConfig, out: &mut Outputs) -> CliResult<Dominated> {
    let p = &cfg.params;
    let e = energy_at(cfg, p)?;
    let est = chaotic_area_fraction(p, e, &cfg.area)?;
    let c = &est.cells;
    let cells = Grid::new(c.region(), c.nx(), c.ny(), c.values().iter().map(|&v| f64::from(v)).collect());
    out.heatmap("area_cells", &cells, cfg.run.pgm)?;
    let summary = json!({
        "energy": est.energy,
        "epsilon": est.epsilon,
        "resolution": est.resolution,
        "allowed": est.allowed,
        "chaotic": est.chaotic,
        "escaped": est.escaped,
        "fraction": est.fraction,
    });
    out.json("area.json", &summary)?;
    out.note("fraction", est.fraction);
    out.note("allowed", est.allowed);
    out.note("escaped", est.escaped);
    Ok((2 * est.escaped > est.allowed + est.escaped)
        .then(|| format!("{} of {} cells escaped", est.escaped, est.allowed + est.escaped)))
}

fn lcn(cfg: &ExperimentConfig, out: &mut Outputs) -> CliResult<Dominated> {
    let prop = propagator(cfg)?;
    let t_end = cfg.t_end.unwrap_or(3000.0);
    let dev = lyapunov_series(&prop, cfg.run.start, t_end, cfg.run.renormalization, &cfg.integrator)?;
    write_deviation(out, "chi.csv", &dev)?;
    let v = classify_by_stretching(&dev, &cfg.classifier);
    out.json("verdict.json", &v)?;
    out.note("final_chi", dev.last_chi());
    out.note("envelope_slope", envelope_slope(&dev, 16.0, t_end));
    out.note("onset", v.onset_time);
    out.note("entry", v.entry_time);
    Ok(dev.truncated.as_ref().map(|a| format!("series truncated at t = {}: {}", a.t, a.reason)))
}
