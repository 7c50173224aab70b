use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use h4bp::acceptance::{self, Check, Criterion, CriterionReport};
use h4bp::continuation::{
    continue_family, seed_family_with, ContinuationOptions, Event, EventKind, FamilyRecord, FamilySeed,
};
use h4bp::equilibria::{
    coefficient_a, discriminant, equilibria, frequencies, mu_critical, resonant_mu, EquilibriumLabel,
};
use h4bp::periodic::sample_path;
use h4bp::propagation::IntegratorConfig;
use h4bp::reference::SUN_JUPITER_MU;
use h4bp::{PhaseState, SystemParams};
use serde::Serialize;

use crate::config::RunConfig;
use crate::records::{
    read_events, read_members, verify_checksums, write_events, write_members, FamilySummary, Manifest, MemberRow,
    EVENTS_FILE, MANIFEST_FILE, MEMBERS_FILE,
};
use crate::svg::{gallery, Chart, Marker, Panel};
use crate::CliError;

/// `|D| / a²` below which the two `L3` frequencies are reported as nearly
/// coincident (they then differ by about one percent).
const NEAR_DEGENERATE: f64 = 1e-4;
const GALLERY_SIZE: usize = 12;
const GALLERY_POINTS: usize = 400;

fn out_err(e: std::io::Error) -> CliError {
    CliError::Io(format!("stdout: {e}"))
}

pub fn info(mu: f64, out: &mut dyn Write) -> Result<(), CliError> {
    let p = SystemParams::new(mu).map_err(|e| CliError::BadArguments(e.to_string()))?;
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(out_err);
    w(out, format!("mu        = {}", p.mu))?;
    w(out, format!("d         = {:.15}", p.d))?;
    w(out, format!("lambda1   = {:.15}", p.lambda1))?;
    w(out, format!("lambda2   = {:.15}", p.lambda2))?;
    w(out, String::new())?;
    w(out, "equilibria:".into())?;
    let eq = equilibria(&p);
    for e in &eq {
        let ev: Vec<String> = e.eigenvalues.iter().map(|z| format!("{:+.6}{:+.6}i", z.re, z.im)).collect();
        w(
            out,
            format!(
                "  {}  ({:+.9}, {:+.9})  {:?}  eigenvalues {}",
                e.label,
                e.position[0],
                e.position[1],
                e.classification,
                ev.join(" ")
            ),
        )?;
    }
    for label in [EquilibriumLabel::L1, EquilibriumLabel::L2, EquilibriumLabel::L3, EquilibriumLabel::L4] {
        if !eq.iter().any(|e| e.label == label) {
            w(out, format!("  {label}  absent at this mass"))?;
        }
    }
    w(out, String::new())?;
    let mu0 = mu_critical();
    let disc = discriminant(p.d);
    w(out, format!("critical mass mu0 = {mu0:.9}; mu {} mu0", if mu <= mu0 { "<=" } else { ">" }))?;
    w(out, format!("discriminant D    = {disc:+.6e}"))?;
    if disc.abs() < NEAR_DEGENERATE * coefficient_a(p.d).powi(2) {
        w(out, "  near-degenerate: D is close to 0, the L3 frequencies nearly coincide".into())?;
    }
    if mu == 0.0 {
        w(out, "frequencies: L3 does not exist at mu = 0".into())?;
    } else {
        match frequencies(&p) {
            Ok(lin) => {
                w(out, format!("omega1 = {:.9}  long period  = {:.6}", lin.omega1, lin.long_period()))?;
                w(out, format!("omega2 = {:.9}  short period = {:.6}", lin.omega2, lin.short_period()))?;
                w(out, format!("omega2/omega1 = {:.6}", lin.ratio()))?;
            }
            Err(e) => w(out, format!("frequencies unavailable: {e}"))?,
        }
    }
    w(out, String::new())?;
    w(out, "resonances omega2/omega1 = k:".into())?;
    for k in 1..=10 {
        let mk = resonant_mu(k).map_err(|e| CliError::BadArguments(e.to_string()))?;
        w(out, format!("  k = {k:>2}  mu_k = {mk:.9}"))?;
    }
    Ok(())
}

/// Trace every family of a validated config, write the records and the
/// manifest, and plot when asked.
pub fn trace(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let seeds = cfg.validate()?;
    let params = SystemParams::new(cfg.mu).map_err(|e| CliError::BadArguments(e.to_string()))?;
    let root = &cfg.output_dir;
    fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
    let probe = root.join(".h4bp-write-test");
    fs::write(&probe, b"").map_err(|e| CliError::io(root, e))?;
    let _ = fs::remove_file(&probe);

    let mut opts = ContinuationOptions { limits: cfg.limits, ..Default::default() };
    opts.corrector.integrator = cfg.integrator;
    let results: Vec<(FamilySeed, h4bp::Result<FamilyRecord>)> = std::thread::scope(|s| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let opts = &opts;
                let params = &params;
                s.spawn(move || {
                    let rec = seed_family_with(params, seed, opts)
                        .and_then(|first| continue_family(params, seed.name(), &first, seed.default_heading(), opts));
                    (seed, rec)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("family worker panicked")).collect()
    });

    let mut manifest_families = Vec::new();
    let mut emitted = Vec::new();
    let mut truncated = Vec::new();
    for (seed, rec) in results {
        let dir = root.join(seed.name());
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let rec = match rec {
            Ok(rec) => rec,
            Err(e) => {
                // A family that cannot even be seeded is recorded as empty.
                writeln!(out, "{seed}: seeding failed: {e}").map_err(out_err)?;
                truncated.push(seed.name().to_string());
                FamilyRecord {
                    name: seed.name().to_string(),
                    mu: cfg.mu,
                    members: Vec::new(),
                    arclength: Vec::new(),
                    events: Vec::new(),
                    termination: h4bp::continuation::Termination::Divergence,
                }
            }
        };
        let rows: Vec<MemberRow> =
            rec.members.iter().enumerate().map(|(i, o)| MemberRow::new(i, o, opts.collision_radius)).collect();
        write_members(&dir.join(MEMBERS_FILE), &rows)?;
        write_events(&dir.join(EVENTS_FILE), &rec.events)?;
        emitted.push(dir.join(MEMBERS_FILE));
        emitted.push(dir.join(EVENTS_FILE));
        if cfg.plot {
            emitted.extend(plot_family(&dir, &rows, &rec.events, cfg.mu, &cfg.integrator)?);
        }
        if !rec.members.is_empty() {
            let (c0, c1) = (rec.members[0].c, rec.members[rec.members.len() - 1].c);
            writeln!(
                out,
                "{}: {} members, C {:.6} .. {:.6}, {} events, termination {:?}",
                rec.name,
                rec.members.len(),
                c0,
                c1,
                rec.events.len(),
                rec.termination
            )
            .map_err(out_err)?;
        }
        if rec.truncated() && !truncated.contains(&rec.name) {
            truncated.push(rec.name.clone());
        }
        manifest_families.push(FamilySummary::new(&rec));
    }

    let mut manifest = Manifest::new(cfg, manifest_families);
    for path in &emitted {
        manifest.add_file(root, path)?;
    }
    manifest.write(root)?;
    if truncated.is_empty() {
        Ok(())
    } else {
        Err(CliError::Truncated(truncated))
    }
}

/// Family directories inside a record directory: the directory itself when
/// it holds a `members.csv`, otherwise its subdirectories that do.
fn family_dirs(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if dir.join(MEMBERS_FILE).is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    if !dir.is_dir() {
        return Err(CliError::Corrupt(format!("{} is not a record directory", dir.display())));
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.join(MEMBERS_FILE).is_file() {
            out.push(path);
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(CliError::Corrupt(format!("no {MEMBERS_FILE} found in {}", dir.display())));
    }
    Ok(out)
}

/// Mass parameter from the manifest next to or above `dir`.
fn record_mu(dir: &Path) -> Option<f64> {
    [Some(dir), dir.parent()].into_iter().flatten().find_map(|d| Manifest::read(d).ok()?.mu())
}

pub fn plot(dir: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let dirs = family_dirs(dir)?;
    for d in dirs {
        let rows = read_members(&d.join(MEMBERS_FILE))?;
        let events = if d.join(EVENTS_FILE).exists() { read_events(&d.join(EVENTS_FILE))? } else { Vec::new() };
        let mu = match record_mu(&d) {
            Some(mu) => mu,
            None => {
                writeln!(out, "{}: no manifest, assuming mu = {SUN_JUPITER_MU}", d.display()).map_err(out_err)?;
                SUN_JUPITER_MU
            }
        };
        let files = plot_family(&d, &rows, &events, mu, &IntegratorConfig::default())?;
        for f in files {
            writeln!(out, "wrote {}", f.display()).map_err(out_err)?;
        }
    }
    Ok(())
}

fn event_marker(rows: &[MemberRow], e: &Event, y: impl Fn(&MemberRow) -> f64) -> Option<Marker> {
    let r = rows.get(e.member)?;
    Some(Marker { x: e.c, y: y(r), label: format!("{} C={:.4}", e.kind, e.c) })
}

/// Members evenly spaced in arclength of the characteristic curve.
fn gallery_members(rows: &[MemberRow]) -> Vec<&MemberRow> {
    if rows.len() <= GALLERY_SIZE {
        return rows.iter().collect();
    }
    let mut s = vec![0.0];
    for w in rows.windows(2) {
        let d = (w[1].q0() - w[0].q0()).hypot(w[1].c - w[0].c);
        s.push(s.last().unwrap() + d);
    }
    let total = *s.last().unwrap();
    let mut picked: Vec<usize> = (0..GALLERY_SIZE)
        .map(|k| {
            let target = total * k as f64 / (GALLERY_SIZE - 1) as f64;
            s.partition_point(|v| *v < target).min(rows.len() - 1)
        })
        .collect();
    picked.dedup();
    picked.into_iter().map(|i| &rows[i]).collect()
}

pub fn plot_family(
    dir: &Path,
    rows: &[MemberRow],
    events: &[Event],
    mu: f64,
    integrator: &IntegratorConfig,
) -> Result<Vec<PathBuf>, CliError> {
    let name = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let warning = rows.is_empty().then(|| "empty record: no members to plot".to_string());
    let series = |f: fn(&MemberRow) -> f64| vec![rows.iter().map(|r| [r.c, f(r)]).collect::<Vec<_>>()];
    let markers = |keep: fn(&EventKind) -> bool, y: fn(&MemberRow) -> f64| {
        events.iter().filter(|e| keep(&e.kind)).filter_map(|e| event_marker(rows, e, y)).collect::<Vec<_>>()
    };

    let characteristic = Chart {
        title: format!("family {name}: characteristic curve"),
        x_label: "C".into(),
        y_label: "x0 (y0 for orbits starting on the y-axis)".into(),
        series: series(MemberRow::q0),
        markers: markers(|k| matches!(k, EventKind::Bifurcation | EventKind::TurningPoint), MemberRow::q0),
        warning: warning.clone(),
        ..Default::default()
    };
    let stability_h = Chart {
        title: format!("family {name}: horizontal stability"),
        x_label: "C".into(),
        y_label: "a_h".into(),
        series: series(|r| r.a_h),
        guides: vec![-2.0, -1.0, 1.0, 2.0],
        markers: markers(|k| matches!(k, EventKind::AhCritical(l) if l.abs() == 2), |r| r.a_h),
        warning: warning.clone(),
    };
    let stability_v = Chart {
        title: format!("family {name}: vertical stability"),
        x_label: "C".into(),
        y_label: "a_v".into(),
        series: series(|r| r.a_v),
        guides: vec![-2.0, -1.0, 1.0, 2.0],
        markers: markers(|k| matches!(k, EventKind::AvCritical(l) if l.abs() == 2), |r| r.a_v),
        warning: warning.clone(),
    };

    let params = SystemParams::new(mu).map_err(|e| CliError::Corrupt(e.to_string()))?;
    let panels: Vec<Panel> = gallery_members(rows)
        .into_iter()
        .map(|r| {
            let ic = PhaseState::planar(r.x0, r.y0, r.vx0, r.vy0);
            Panel {
                caption: format!("#{} C={:.4} T={:.3}", r.index, r.c, r.period),
                path: sample_path(&params, integrator, &ic, r.period, GALLERY_POINTS).map_err(|e| e.to_string()),
            }
        })
        .collect();
    let orbits = gallery(&format!("family {name}: orbits"), &panels, warning.as_deref());

    let mut written = Vec::new();
    for (file, body) in [
        ("characteristic.svg", characteristic.render()),
        ("stability_h.svg", stability_h.render()),
        ("stability_v.svg", stability_v.render()),
        ("orbits.svg", orbits),
    ] {
        let path = dir.join(file);
        fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// One line of `verify` output.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyLine {
    pub name: String,
    pub criterion: Option<u8>,
    pub pass: bool,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl From<CriterionReport> for VerifyLine {
    fn from(r: CriterionReport) -> Self {
        VerifyLine {
            name: r.criterion.name().to_string(),
            criterion: Some(r.criterion.number()),
            pass: r.pass(),
            checks: r.checks,
            error: r.error,
        }
    }
}

/// Events of each traced family with the C range it covers.
type TracedEvents = HashMap<FamilySeed, ((f64, f64), Vec<Event>)>;

fn emit(lines: &[VerifyLine], out: &mut dyn Write) -> Result<(), CliError> {
    for l in lines {
        writeln!(out, "{}", serde_json::to_string(l).expect("report serializes")).map_err(out_err)?;
    }
    Ok(())
}

/// Recompute the selected criteria (all when none is selected and no
/// records are given). With a record directory the manifest checksums are
/// checked and family events are taken from the records.
pub fn verify(records: Option<&Path>, selected: &[Criterion], out: &mut dyn Write) -> Result<(), CliError> {
    let mut lines = Vec::new();
    let mut events: Option<TracedEvents> = None;
    if let Some(dir) = records {
        if !dir.join(MANIFEST_FILE).is_file() {
            return Err(CliError::Corrupt(format!("no {MANIFEST_FILE} in {}", dir.display())));
        }
        let manifest = Manifest::read(dir)?;
        let status = verify_checksums(dir, &manifest)?;
        lines.push(VerifyLine {
            name: "checksums".into(),
            criterion: None,
            pass: status.iter().all(|s| s.ok),
            checks: status
                .iter()
                .map(|s| Check {
                    label: format!("{}: {}", s.file, s.detail),
                    value: f64::from(u8::from(!s.ok)),
                    expected: 0.0,
                    tolerance: 0.0,
                    pass: s.ok,
                })
                .collect(),
            error: None,
        });
        if !lines[0].pass {
            emit(&lines, out)?;
            return Err(CliError::Corrupt("checksum mismatch".into()));
        }
        let mut map = HashMap::new();
        for d in family_dirs(dir)? {
            let name = d.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let rows = read_members(&d.join(MEMBERS_FILE))?;
            if let Ok(seed) = name.parse::<FamilySeed>() {
                let span = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.c), b.max(r.c)));
                map.insert(seed, (span, read_events(&d.join(EVENTS_FILE))?));
            }
        }
        events = Some(map);
    }

    let criteria: Vec<Criterion> = if selected.is_empty() && records.is_none() {
        Criterion::ALL.to_vec()
    } else if selected.is_empty() {
        vec![Criterion::FamilyEvents]
    } else {
        selected.to_vec()
    };
    for c in criteria {
        let line = match (&events, c) {
            (Some(map), Criterion::FamilyEvents) => {
                // Only reference events inside the traced stretch of a family
                // can be expected in its record.
                let traced = |seed: &FamilySeed, c: f64, tol: f64| {
                    map.get(seed).is_some_and(|((lo, hi), _)| c >= lo - tol && c <= hi + tol)
                };
                let found: HashMap<_, _> = map.iter().map(|(k, (_, ev))| (*k, ev.clone())).collect();
                let checks: Vec<Check> = acceptance::compare_family_events(&found)
                    .into_iter()
                    .zip(h4bp::reference::FAMILY_EVENTS)
                    .filter(|(_, r)| traced(&r.family, r.c, r.tolerance))
                    .map(|(c, _)| c)
                    .collect();
                VerifyLine {
                    name: c.name().into(),
                    criterion: Some(c.number()),
                    pass: checks.iter().all(|k| k.pass),
                    error: checks.is_empty().then(|| "no reference event lies in a traced range".into()),
                    checks,
                }
            }
            _ => acceptance::run(c).into(),
        };
        lines.push(line);
    }

    emit(&lines, out)?;
    if lines.iter().all(|l| l.pass) {
        Ok(())
    } else {
        Err(CliError::Failed)
    }
}
