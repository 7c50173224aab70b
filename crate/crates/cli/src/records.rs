//! On-disk family records: `members.csv`, `events.json` and the run
//! `manifest.json` with SHA-256 checksums of every emitted file.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use h4bp::continuation::{Event, FamilyRecord, Termination};
use h4bp::periodic::{PeriodicOrbit, SymmetryClass};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const MEMBERS_FILE: &str = "members.csv";
pub const EVENTS_FILE: &str = "events.json";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const COLUMNS: [&str; 13] =
    ["index", "C", "x0", "y0", "vx0", "vy0", "T", "a_h", "a_v", "half_a", "half_d", "symmetry", "collision"];

#[derive(Debug, Clone, PartialEq)]
pub struct MemberRow {
    pub index: usize,
    pub c: f64,
    pub x0: f64,
    pub y0: f64,
    pub vx0: f64,
    pub vy0: f64,
    pub period: f64,
    pub a_h: f64,
    pub a_v: f64,
    pub half_a: f64,
    pub half_d: f64,
    pub symmetry: SymmetryClass,
    pub collision: bool,
}

impl MemberRow {
    /// Row for member `index`; it counts as a collision orbit when it comes
    /// closer than `collision_radius` to the tertiary.
    pub fn new(index: usize, o: &PeriodicOrbit, collision_radius: f64) -> Self {
        MemberRow {
            index,
            c: o.c,
            x0: o.ic.x,
            y0: o.ic.y,
            vx0: o.ic.vx,
            vy0: o.ic.vy,
            period: o.period,
            a_h: o.ah,
            a_v: o.av,
            half_a: o.half_a,
            half_d: o.half_d,
            symmetry: o.symmetry,
            collision: o.r_min < collision_radius,
        }
    }

    /// Coordinate of the initial condition along its section axis.
    pub fn q0(&self) -> f64 {
        if self.x0 == 0.0 && self.y0 != 0.0 {
            self.y0
        } else {
            self.x0
        }
    }

    fn fields(&self) -> [String; 13] {
        [
            self.index.to_string(),
            fmt17(self.c),
            fmt17(self.x0),
            fmt17(self.y0),
            fmt17(self.vx0),
            fmt17(self.vy0),
            fmt17(self.period),
            fmt17(self.a_h),
            fmt17(self.a_v),
            fmt17(self.half_a),
            fmt17(self.half_d),
            self.symmetry.to_string(),
            self.collision.to_string(),
        ]
    }

    fn parse(rec: &csv::StringRecord, line: usize) -> Result<Self, String> {
        if rec.len() != COLUMNS.len() {
            return Err(format!("line {line}: expected {} fields, found {}", COLUMNS.len(), rec.len()));
        }
        let num = |i: usize| -> Result<f64, String> {
            rec[i].parse::<f64>().map_err(|_| format!("line {line}: bad {} `{}`", COLUMNS[i], &rec[i]))
        };
        Ok(MemberRow {
            index: rec[0].parse().map_err(|_| format!("line {line}: bad index `{}`", &rec[0]))?,
            c: num(1)?,
            x0: num(2)?,
            y0: num(3)?,
            vx0: num(4)?,
            vy0: num(5)?,
            period: num(6)?,
            a_h: num(7)?,
            a_v: num(8)?,
            half_a: num(9)?,
            half_d: num(10)?,
            symmetry: rec[11].parse().map_err(|_| format!("line {line}: bad symmetry `{}`", &rec[11]))?,
            collision: rec[12].parse().map_err(|_| format!("line {line}: bad collision `{}`", &rec[12]))?,
        })
    }
}

/// 17 significant digits, enough for an exact round trip of any `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_members(path: &Path, rows: &[MemberRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    w.write_record(COLUMNS).map_err(|e| CliError::io(path, e))?;
    for r in rows {
        w.write_record(r.fields()).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_members(path: &Path) -> Result<Vec<MemberRow>, CliError> {
    let corrupt = |msg: String| CliError::Corrupt(format!("{}: {msg}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| corrupt(e.to_string()))?;
    let header = r.headers().map_err(|e| corrupt(e.to_string()))?;
    if header.iter().ne(COLUMNS) {
        return Err(corrupt(format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| corrupt(e.to_string()))?;
        rows.push(MemberRow::parse(&rec, i + 2).map_err(corrupt)?);
    }
    Ok(rows)
}

pub fn write_events(path: &Path, events: &[Event]) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(events).expect("events serialize");
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn read_events(path: &Path) -> Result<Vec<Event>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Corrupt(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Corrupt(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FamilySummary {
    pub name: String,
    pub members: usize,
    pub events: usize,
    pub termination: Termination,
}

impl FamilySummary {
    pub fn new(rec: &FamilyRecord) -> Self {
        FamilySummary {
            name: rec.name.clone(),
            members: rec.members.len(),
            events: rec.events.len(),
            termination: rec.termination,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub config: serde_json::Value,
    pub versions: BTreeMap<String, String>,
    pub families: Vec<FamilySummary>,
    /// SHA-256 of every emitted file, keyed by its path relative to the
    /// output directory with `/` separators.
    pub checksums: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(config: &RunConfig, families: Vec<FamilySummary>) -> Self {
        let versions = [("h4bp", h4bp::VERSION), ("h4bp-cli", env!("CARGO_PKG_VERSION"))]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Manifest {
            config: serde_json::to_value(config).expect("config serializes"),
            versions,
            families,
            checksums: BTreeMap::new(),
        }
    }

    /// Record the checksum of an emitted file below `root`.
    pub fn add_file(&mut self, root: &Path, path: &Path) -> Result<(), CliError> {
        self.checksums.insert(relative_key(root, path), sha256_file(path)?);
        Ok(())
    }

    pub fn write(&self, root: &Path) -> Result<(), CliError> {
        let path = root.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }

    pub fn read(root: &Path) -> Result<Self, CliError> {
        let path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| CliError::Corrupt(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Corrupt(format!("{}: {e}", path.display())))
    }

    /// Mass parameter of the run, when the config echo carries one.
    pub fn mu(&self) -> Option<f64> {
        self.config.get("mu").and_then(|v| v.as_f64())
    }
}

fn relative_key(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let mut f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChecksumStatus {
    pub file: String,
    pub ok: bool,
    pub detail: &'static str,
}

/// Compare every file listed in the manifest with its recorded checksum.
pub fn verify_checksums(root: &Path, manifest: &Manifest) -> Result<Vec<ChecksumStatus>, CliError> {
    let mut out = Vec::new();
    for (rel, want) in &manifest.checksums {
        let path = root.join(rel);
        let status = if !path.is_file() {
            ChecksumStatus { file: rel.clone(), ok: false, detail: "missing" }
        } else if &sha256_file(&path)? == want {
            ChecksumStatus { file: rel.clone(), ok: true, detail: "ok" }
        } else {
            ChecksumStatus { file: rel.clone(), ok: false, detail: "checksum mismatch" }
        };
        out.push(status);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn row(i: usize, x: f64) -> MemberRow {
        MemberRow {
            index: i,
            c: 4.0 + x,
            x0: x,
            y0: 0.0,
            vx0: 0.0,
            vy0: -1.0 / 3.0,
            period: std::f64::consts::PI,
            a_h: 1.999_999_999_999_999_8,
            a_v: -0.1,
            half_a: 1e-300,
            half_d: -5e-324,
            symmetry: SymmetryClass::XSymmetric,
            collision: i.is_multiple_of(2),
        }
    }

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt17(-2.0), "-2.0000000000000000e0");
    }

    #[test]
    fn members_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MEMBERS_FILE);
        let rows: Vec<_> = (0..5).map(|i| row(i, 0.1 * i as f64 + 1e-17)).collect();
        write_members(&path, &rows).unwrap();
        assert_eq!(read_members(&path).unwrap(), rows);
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![any::<f64>().prop_filter("finite", |x| x.is_finite()), -1e3..1e3f64]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn arbitrary_rows_round_trip(
            values in proptest::collection::vec(proptest::array::uniform10(finite()), 0..6),
            sym in 0..4usize,
        ) {
            let symmetry = [
                SymmetryClass::XSymmetric,
                SymmetryClass::YSymmetric,
                SymmetryClass::DoublySymmetric,
                SymmetryClass::Asymmetric,
            ][sym];
            let rows: Vec<MemberRow> = values
                .iter()
                .enumerate()
                .map(|(i, v)| MemberRow {
                    index: i,
                    c: v[0],
                    x0: v[1],
                    y0: v[2],
                    vx0: v[3],
                    vy0: v[4],
                    period: v[5],
                    a_h: v[6],
                    a_v: v[7],
                    half_a: v[8],
                    half_d: v[9],
                    symmetry,
                    collision: i % 3 == 1,
                })
                .collect();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join(MEMBERS_FILE);
            write_members(&path, &rows).unwrap();
            prop_assert_eq!(read_members(&path).unwrap(), rows);
        }
    }

    #[test]
    fn corrupt_members_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MEMBERS_FILE);
        write_members(&path, &[row(0, 0.5)]).unwrap();
        let text = fs::read_to_string(&path).unwrap().replace("x-symmetric", "sideways");
        fs::write(&path, text).unwrap();
        assert!(matches!(read_members(&path), Err(CliError::Corrupt(_))));
        fs::write(&path, "index,C\n1,2\n").unwrap();
        assert!(matches!(read_members(&path), Err(CliError::Corrupt(_))));
    }

    #[test]
    fn checksum_detects_single_bit_flip() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("g");
        fs::create_dir(&sub).unwrap();
        fs::write(sub.join(MEMBERS_FILE), b"abc\n").unwrap();
        let mut m = Manifest::new(&RunConfig::default(), Vec::new());
        m.add_file(dir.path(), &sub.join(MEMBERS_FILE)).unwrap();
        m.write(dir.path()).unwrap();
        let m = Manifest::read(dir.path()).unwrap();
        assert_eq!(m.checksums.keys().collect::<Vec<_>>(), ["g/members.csv"]);
        assert!(verify_checksums(dir.path(), &m).unwrap().iter().all(|s| s.ok));
        fs::write(sub.join(MEMBERS_FILE), b"abb\n").unwrap();
        let s = verify_checksums(dir.path(), &m).unwrap();
        assert_eq!(s[0].detail, "checksum mismatch");
    }
}
