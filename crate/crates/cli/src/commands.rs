//! Subcommand bodies. Each one writes plot-ready CSV into the output
//! directory, headed by a `#` block with the resolved configuration.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use rydberg_core::collective::{build_basis, find_resonances};
use rydberg_core::dynamics::{evolve, initial_state_population_phase, level_matcher, transfer_fraction, unit_vector, ResonanceScan};
use rydberg_core::gate::{field_mismatch_for_loss, optimize as optimize_gate, GateModel, GateParameters, StageMode};
use rydberg_core::interaction::HamiltonianTemplate;
use rydberg_core::{CollectiveState, Error, Physics, SpeciesData, StarkMap};

use crate::config::{parse_pattern, RunConfig};

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Numerical(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Validation(m) => write!(f, "invalid input: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ToleranceNotMet { .. } | Error::NotPositiveSemidefinite(_) | Error::Singular | Error::Io(_) => Failure::Numerical(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numerical(e.to_string())
    }
}

impl From<String> for Failure {
    fn from(m: String) -> Self {
        Failure::Validation(m)
    }
}

pub struct Context {
    pub cfg: RunConfig,
    pub command: &'static str,
    pub phys: Arc<Physics>,
}

impl Context {
    pub fn new(cfg: RunConfig, command: &'static str) -> Result<Self, Failure> {
        let species = match &cfg.species {
            Some(p) => SpeciesData::load(p)?,
            None => SpeciesData::rubidium(),
        };
        let phys = Arc::new(Physics::new(species, cfg.temperature_k, cfg.basis.params().window));
        Ok(Context { cfg, command, phys })
    }

    fn header(&self, extra: &[String]) -> String {
        let s = &self.phys.species;
        let mut h = String::new();
        let _ = writeln!(h, "# rydberg-toffoli {} {}", env!("CARGO_PKG_VERSION"), self.command);
        let _ = writeln!(h, "# species = {} {} sha256 = {}", s.species, s.version, s.checksum);
        for line in extra {
            let _ = writeln!(h, "# {line}");
        }
        let _ = writeln!(h, "# resolved config:");
        for line in self.cfg.to_toml().lines() {
            let _ = writeln!(h, "#   {line}");
        }
        h
    }

    fn write(&self, name: &str, extra: &[String], body: &str) -> Result<PathBuf, Failure> {
        std::fs::create_dir_all(&self.cfg.out)?;
        let path = self.cfg.out.join(name);
        std::fs::write(&path, format!("{}{body}", self.header(extra)))?;
        eprintln!("wrote {}", path.display());
        Ok(path)
    }

    fn gnuplot(&self, csv: &str, script: &str) -> Result<(), Failure> {
        if self.cfg.gnuplot {
            let name = csv.replace(".csv", ".gp");
            let text = format!("set datafile separator ','\nset key autotitle columnhead\nfile = '{csv}'\n{script}");
            std::fs::write(self.cfg.out.join(name), text)?;
        }
        Ok(())
    }

    fn template(&self, initial: CollectiveState) -> Result<HamiltonianTemplate, Failure> {
        let basis = Arc::new(build_basis(&self.phys, initial, self.cfg.basis.params())?);
        Ok(HamiltonianTemplate::new(&self.phys, basis, self.cfg.geometry()?, self.cfg.decay)?)
    }
}

fn csv_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

pub fn stark_map(ctx: &Context) -> Result<(), Failure> {
    let states = ctx.cfg.stark_states()?;
    let fields = ctx.cfg.stark_map.fields.values();
    let reference = states[0];
    let map = StarkMap::compute(&ctx.phys, &states, &reference, &fields)?;
    let final_ = ctx.cfg.final_state()?;
    let range = (fields[0], *fields.last().unwrap());
    let mut extra = vec![format!("energies in h*MHz relative to {reference} at zero field")];
    let mut crossings = String::from("state_index,state,field_v_cm\n");
    for (k, s) in states.iter().enumerate() {
        extra.push(format!("column {} = {s}", k + 1));
        if *s == final_ {
            continue;
        }
        let hits = if range.1 > range.0 { find_resonances(&ctx.phys, s, &final_, range, ctx.cfg.stark_map.crossing_step)? } else { Vec::new() };
        for f in hits {
            let _ = writeln!(crossings, "{k},{},{f}", csv_quote(&s.to_string()));
        }
    }
    let mut body = String::from("field_v_cm");
    for s in &states {
        body.push(',');
        body.push_str(&csv_quote(&s.to_string()));
    }
    body.push('\n');
    for (i, f) in map.fields.iter().enumerate() {
        let _ = write!(body, "{f}");
        for c in &map.curves {
            let _ = write!(body, ",{}", c[i]);
        }
        body.push('\n');
    }
    ctx.write("stark_map.csv", &extra, &body)?;
    ctx.write("stark_map_crossings.csv", &[format!("crossings with {final_}")], &crossings)?;
    ctx.gnuplot(
        "stark_map.csv",
        &format!("set xlabel 'E (V/cm)'\nset ylabel 'energy (MHz)'\nplot for [k=2:{}] file using 1:k with lines\n", states.len() + 1),
    )
}

pub fn resonance_scan(ctx: &Context) -> Result<(), Failure> {
    let sc = &ctx.cfg.resonance_scan;
    let tpl = ctx.template(ctx.cfg.initial_state()?)?;
    let (n, l, j2) = ctx.cfg.target_level()?;
    let scan = ResonanceScan::compute(&tpl, &sc.fields.values(), sc.t_us, level_matcher(n, l, j2))?;
    let mut extra = vec![format!("basis: {}", tpl.basis().provenance()), format!("rho = fraction of atoms in {} at T = {} us", ctx.cfg.channel.target_level, sc.t_us)];
    for f in scan.features(sc.rel_threshold, sc.merge_gap) {
        extra.push(format!("feature: peak {} V/cm (rho {}), span [{}, {}]", f.peak_x, f.peak_y, f.lo, f.hi));
    }
    let mut body = String::from("field_v_cm,rho\n");
    for (f, r) in scan.fields.iter().zip(&scan.rho) {
        let _ = writeln!(body, "{f},{r}");
    }
    ctx.write("resonance_scan.csv", &extra, &body)?;
    ctx.gnuplot("resonance_scan.csv", "set xlabel 'E (V/cm)'\nset ylabel 'rho'\nplot file using 1:2 with lines\n")
}

pub fn dynamics(ctx: &Context) -> Result<(), Failure> {
    let rydberg = ctx.cfg.rydberg()?;
    let gate = &ctx.cfg.gate;
    let (n, l, j2) = ctx.cfg.target_level()?;
    for name in &ctx.cfg.dynamics.configurations {
        let tpl = ctx.template(CollectiveState::pattern(rydberg, parse_pattern(name)?))?;
        let h = tpl.at_field(gate.field)?;
        let traj = evolve(&h, &unit_vector(h.dim(), 0), gate.t_us, ctx.cfg.dynamics.steps, ctx.cfg.tolerance)?;
        let pp = initial_state_population_phase(&traj);
        let rho = transfer_fraction(&traj, tpl.basis(), level_matcher(n, l, j2));
        let norms = traj.norms_squared();
        let last = pp.last().unwrap();
        let (lo, hi) = pp.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), p| (lo.min(p.population), hi.max(p.population)));
        let extra = vec![
            format!("configuration {name}: {}", tpl.basis().initial()),
            format!("basis: {}", tpl.basis().provenance()),
            format!("E = {} V/cm, T = {} us", gate.field, gate.t_us),
            format!("final population = {}", last.population),
            format!("final phase = {}", last.phase.map_or("undefined".into(), |p| p.to_string())),
            format!("population swing = {}", hi - lo),
        ];
        let mut body = String::from("t_us,P0,phi0_rad,rho_target,norm_squared\n");
        for ((p, r), nsq) in pp.iter().zip(&rho).zip(&norms) {
            let phase = p.phase.map_or(String::new(), |v| v.to_string());
            let _ = writeln!(body, "{},{},{phase},{r},{nsq}", p.t_us, p.population);
        }
        let file = format!("dynamics_{name}.csv");
        ctx.write(&file, &extra, &body)?;
        ctx.gnuplot(&file, "set xlabel 't (us)'\nset y2tics\nplot file using 1:2 with lines, file using 1:3 axes x1y2 with lines\n")?;
    }
    Ok(())
}

fn gate_model(ctx: &Context) -> Result<GateModel, Failure> {
    Ok(GateModel::new(ctx.phys.clone(), ctx.cfg.rydberg()?, ctx.cfg.basis.params(), ctx.cfg.decay))
}

fn report_string(r: &rydberg_core::gate::GateResult) -> Result<String, Failure> {
    let mut buf = Vec::new();
    r.write_report(&mut buf)?;
    Ok(String::from_utf8(buf).expect("report is UTF-8"))
}

pub fn fidelity(ctx: &Context) -> Result<(), Failure> {
    let model = gate_model(ctx)?;
    let params = ctx.cfg.gate_parameters();
    let fields = ctx.cfg.fidelity.fields.values();
    let mut body = String::from("field_v_cm,mean_fidelity,min_fidelity\n");
    for f in &fields {
        let r = model.average_fidelity(&GateParameters { field: *f, ..params }, StageMode::Physical)?;
        let _ = writeln!(body, "{f},{},{}", r.mean, r.min);
    }
    let mut extra = vec![format!("R = {} um, T = {} us, mean over all 216 product inputs", params.r_um, params.t_us)];
    if ctx.cfg.fidelity.sensitivity {
        let (minus, plus) = field_mismatch_for_loss(&model, &params, ctx.cfg.fidelity.loss, ctx.cfg.fidelity.max_offset)?;
        let show = |v: Option<f64>| v.map_or("not reached".to_string(), |x| x.to_string());
        extra.push(format!("field offset for mean-fidelity loss {}: below {} V/cm, above {} V/cm", ctx.cfg.fidelity.loss, show(minus), show(plus)));
    }
    ctx.write("fidelity_scan.csv", &extra, &body)?;
    ctx.gnuplot("fidelity_scan.csv", "set xlabel 'E (V/cm)'\nset ylabel 'F'\nplot file using 1:2 with linespoints\n")?;
    let r = model.average_fidelity(&params, StageMode::Physical)?;
    ctx.write("gate_result.csv", &[], &report_string(&r)?)?;
    Ok(())
}

pub fn optimize(ctx: &Context) -> Result<(), Failure> {
    let model = gate_model(ctx)?;
    let rep = optimize_gate(&model, &ctx.cfg.gate_parameters(), &ctx.cfg.gate_bounds(), &ctx.cfg.optimize_config())?;
    let mut body = String::new();
    let _ = writeln!(body, "r_um = {}", rep.params.r_um);
    let _ = writeln!(body, "t_us = {}", rep.params.t_us);
    let _ = writeln!(body, "field = {}", rep.params.field);
    if let Some(ex) = rep.params.excitation {
        let _ = writeln!(body, "excitation_field = {}", ex.field);
        let _ = writeln!(body, "tau_us = {}", ex.tau_us);
    }
    let _ = writeln!(body, "mean_fidelity = {}", rep.result.mean);
    let _ = writeln!(body, "min_fidelity = {}", rep.result.min);
    let _ = writeln!(body, "coarse_evals = {}", rep.coarse_evals);
    let _ = writeln!(body, "fine_evals = {}", rep.fine_evals);
    let _ = writeln!(body, "evals = {}", rep.evals());
    let _ = writeln!(body, "converged = {}", rep.converged);
    let _ = writeln!(body, "simplex_diameter = {}", rep.simplex_diameter);
    ctx.write("optimize_report.toml", &[], &body)?;
    ctx.write("gate_result.csv", &[], &report_string(&rep.result)?)?;
    println!("{body}");
    Ok(())
}

pub fn dump_matrix_elements(ctx: &Context) -> Result<(), Failure> {
    let basis = build_basis(&ctx.phys, ctx.cfg.initial_state()?, ctx.cfg.basis.params())?;
    let pairs = basis.radial_pairs();
    let rows = pairs
        .par_iter()
        .map(|(a, b)| {
            let qc = ctx.phys.dipoles.radial_qc(a, b)?;
            let nv = ctx.phys.dipoles.radial_numerov(a, b)?;
            Ok((*a, *b, qc, nv))
        })
        .collect::<rydberg_core::Result<Vec<_>>>()?;
    let mut body = String::from("n1,l1,j1,n2,l2,j2,radial_qc,radial_numerov,rel_diff\n");
    for (a, b, qc, nv) in rows {
        let rel = if nv == 0.0 { 0.0 } else { (qc - nv).abs() / nv.abs() };
        let _ = writeln!(body, "{},{},{},{},{},{},{qc},{nv},{rel}", a.n, a.l, a.j(), b.n, b.l, b.j());
    }
    let extra = vec![format!("basis: {}", basis.provenance()), "radial integrals in units of a0".to_string()];
    ctx.write("matrix_elements.csv", &extra, &body)?;
    Ok(())
}

pub fn dump_hamiltonian(ctx: &Context) -> Result<(), Failure> {
    let tpl = ctx.template(ctx.cfg.initial_state()?)?;
    let h = tpl.at_field(ctx.cfg.gate.field)?;
    let mut buf = Vec::new();
    h.write_csv(&mut buf)?;
    let extra = vec![format!("basis: {}", tpl.basis().provenance()), format!("E = {} V/cm", h.field)];
    ctx.write("hamiltonian.csv", &extra, &String::from_utf8(buf).expect("UTF-8"))?;
    Ok(())
}
