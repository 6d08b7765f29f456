//! Loading, validation, z-standardization, and description of the
//! meta-analytic dataset: one row per heritability estimate, with its
//! sampling variance and 29 study-level moderators.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Value constraint of a moderator column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeratorKind {
    /// Exactly 0 or 1.
    Binary,
    /// Any value in [0, 1].
    Proportion,
    /// Any finite real.
    Continuous,
}

/// One moderator column definition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeratorDef {
    pub name: String,
    pub kind: ModeratorKind,
    pub description: String,
}

/// Ordered list of moderator definitions. The canonical schema has 29
/// entries; reduced schemas are used by synthetic and calibration runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeratorSchema {
    entries: Vec<ModeratorDef>,
}

/// Canonical moderator names, in reporting order.
pub const CANONICAL_MODERATORS: [(&str, ModeratorKind, &str); 29] = {
    use ModeratorKind::*;
    [
        ("SE", Continuous, "square root of the effect-size sampling variance"),
        ("PY", Continuous, "publication year"),
        ("h2_Ave", Binary, "1 if the effect size is a variance-weighted mean over informants"),
        ("female", Binary, "1 if estimated from female sibling pairs"),
        ("male", Binary, "1 if estimated from male sibling pairs"),
        ("genmodel", Binary, "1 if the estimate controls for gender via a genetic model"),
        ("adoptee", Binary, "1 if estimated from adoptees"),
        ("mom", Proportion, "mother ratings (proportion when h2_Ave = 1)"),
        ("dad", Proportion, "father ratings (proportion when h2_Ave = 1)"),
        ("teacher", Proportion, "teacher ratings (proportion when h2_Ave = 1)"),
        ("self", Proportion, "self ratings (proportion when h2_Ave = 1)"),
        ("observer", Proportion, "observer ratings (proportion when h2_Ave = 1)"),
        ("CD", Proportion, "conduct-disorder ratings (proportion when h2_Ave = 1)"),
        ("agg", Proportion, "aggression ratings (proportion when h2_Ave = 1)"),
        ("delinq", Proportion, "delinquency ratings (proportion when h2_Ave = 1)"),
        ("ext", Proportion, "externalizing ratings (proportion when h2_Ave = 1)"),
        ("Achenb", Binary, "1 if an Achenbach-family questionnaire"),
        ("interview", Binary, "1 if a diagnostic interview"),
        ("age", Continuous, "mean age of subjects in months"),
        ("white60", Binary, "1 if at least 60% of the sample is white"),
        ("zygquest", Binary, "1 if zygosity was determined by questionnaire"),
        ("zygdna", Binary, "1 if zygosity was determined by DNA samples"),
        ("sesmiss", Binary, "1 if SES information is missing"),
        ("seslow", Binary, "1 if the sample contains low-SES subjects"),
        ("sesmidhi", Binary, "1 if the sample contains mid- or high-SES subjects"),
        ("repsample", Binary, "1 if a representative sample, 0 if convenience"),
        ("longsampl", Binary, "1 if a longitudinal sample, 0 if cross-sectional"),
        ("latitude", Continuous, "latitude of the study location"),
        ("longitude", Continuous, "longitude of the study location"),
    ]
};

impl ModeratorSchema {
    /// The canonical 29-moderator schema.
    pub fn canonical() -> Self {
        Self {
            entries: CANONICAL_MODERATORS
                .iter()
                .map(|&(name, kind, description)| ModeratorDef {
                    name: name.into(),
                    kind,
                    description: description.into(),
                })
                .collect(),
        }
    }

    /// A schema with caller-supplied entries; names must be unique and
    /// non-empty.
    pub fn new(entries: Vec<ModeratorDef>) -> Result<Self> {
        for (i, e) in entries.iter().enumerate() {
            if e.name.is_empty() {
                return Err(Error::Domain(format!("moderator {i} has an empty name")));
            }
            if entries[..i].iter().any(|prev| prev.name == e.name) {
                return Err(Error::Domain(format!("duplicate moderator `{}`", e.name)));
            }
        }
        Ok(Self { entries })
    }

    /// A reduced all-continuous schema `x1..xp` for synthetic runs.
    pub fn continuous(p: usize) -> Self {
        Self {
            entries: (1..=p)
                .map(|k| ModeratorDef {
                    name: format!("x{k}"),
                    kind: ModeratorKind::Continuous,
                    description: String::new(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ModeratorDef] {
        &self.entries
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    fn check_value(&self, k: usize, value: f64) -> std::result::Result<(), String> {
        let def = &self.entries[k];
        if !value.is_finite() {
            return Err(format!("`{}` is not finite", def.name));
        }
        match def.kind {
            ModeratorKind::Binary if value != 0.0 && value != 1.0 => {
                Err(format!("`{}` = {value} is not 0 or 1", def.name))
            }
            ModeratorKind::Proportion if !(0.0..=1.0).contains(&value) => {
                Err(format!("`{}` = {value} is outside [0, 1]", def.name))
            }
            _ => Ok(()),
        }
    }
}

/// One study sample's effect size, sampling variance, and moderator values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSizeRecord {
    pub study_id: String,
    /// Heritability effect size.
    pub y: f64,
    /// Sampling variance of `y`; the reciprocal is the study weight.
    pub var: f64,
    /// Moderator values keyed by schema order.
    pub x: Vec<f64>,
}

impl EffectSizeRecord {
    pub fn validate(&self, schema: &ModeratorSchema) -> std::result::Result<(), String> {
        if !self.y.is_finite() {
            return Err(format!("`h2` = {} is not finite", self.y));
        }
        if !(self.var > 0.0) || !self.var.is_finite() {
            return Err(format!("`var` = {} must be positive and finite", self.var));
        }
        if self.x.len() != schema.len() {
            return Err(format!(
                "expected {} moderators, found {}",
                schema.len(),
                self.x.len()
            ));
        }
        for k in 0..self.x.len() {
            schema.check_value(k, self.x[k])?;
        }
        if let Some(se_idx) = schema.index_of("SE") {
            if (self.x[se_idx] - self.var.sqrt()).abs() > 1e-6 {
                return Err(format!(
                    "`SE` = {} disagrees with sqrt(var) = {}",
                    self.x[se_idx],
                    self.var.sqrt()
                ));
            }
        }
        Ok(())
    }
}

/// Centers, scales, and flags retained from z-standardization, plus the
/// observed original-scale column ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub names: Vec<String>,
    pub centers: Vec<f64>,
    pub scales: Vec<f64>,
    /// True where the raw column was constant; its scale is forced to 1 and
    /// the corresponding slope is identified only through its prior.
    pub constant: Vec<bool>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Standardization {
    /// Maps one original-scale moderator vector to the standardized scale.
    pub fn standardize_row(&self, x_original: &[f64]) -> Result<Vec<f64>> {
        if x_original.len() != self.centers.len() {
            return Err(Error::Mismatch(format!(
                "query has {} moderators, standardization has {}",
                x_original.len(),
                self.centers.len()
            )));
        }
        Ok(x_original
            .iter()
            .zip(self.centers.iter().zip(&self.scales))
            .map(|(&x, (&c, &s))| (x - c) / s)
            .collect())
    }

    /// Inverse of [`Standardization::standardize_row`].
    pub fn destandardize_row(&self, x_std: &[f64]) -> Vec<f64> {
        x_std
            .iter()
            .zip(self.centers.iter().zip(&self.scales))
            .map(|(&z, (&c, &s))| z * s + c)
            .collect()
    }

    pub fn p(&self) -> usize {
        self.centers.len()
    }
}

/// Records with z-standardized moderators plus the mapping back to the
/// original scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedDataset {
    pub records: Vec<EffectSizeRecord>,
    pub standardization: Standardization,
}

impl StandardizedDataset {
    pub fn n(&self) -> usize {
        self.records.len()
    }

    /// Number of moderators (excluding the intercept).
    pub fn p(&self) -> usize {
        self.standardization.p()
    }

    /// Design row for observation `i`: leading 1 followed by standardized
    /// moderator values.
    pub fn design_row(&self, i: usize) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.p() + 1);
        row.push(1.0);
        row.extend_from_slice(&self.records[i].x);
        row
    }

    /// Records mapped back to the original moderator scale.
    pub fn destandardize(&self) -> Vec<EffectSizeRecord> {
        self.records
            .iter()
            .map(|r| EffectSizeRecord {
                study_id: r.study_id.clone(),
                y: r.y,
                var: r.var,
                x: self.standardization.destandardize_row(&r.x),
            })
            .collect()
    }
}

/// Z-standardizes each moderator column to sample mean 0 and sample variance
/// 1 (n-1 denominator). Constant columns get scale 1 and a flag instead of
/// an error, since subset analyses legitimately produce them. Requires at
/// least two records.
pub fn standardize(
    records: &[EffectSizeRecord],
    schema: &ModeratorSchema,
) -> Result<StandardizedDataset> {
    if records.len() < 2 {
        return Err(Error::Domain(
            "standardization requires at least 2 records".into(),
        ));
    }
    let p = schema.len();
    for (i, r) in records.iter().enumerate() {
        r.validate(schema).map_err(|reason| Error::Row {
            row: i + 1,
            column: "-".into(),
            reason,
        })?;
    }
    let mut centers = Vec::with_capacity(p);
    let mut scales = Vec::with_capacity(p);
    let mut constant = Vec::with_capacity(p);
    let mut min = Vec::with_capacity(p);
    let mut max = Vec::with_capacity(p);
    for k in 0..p {
        let column: Vec<f64> = records.iter().map(|r| r.x[k]).collect();
        let c = stats::mean(&column);
        let sd = stats::sample_sd(&column);
        let is_const = sd == 0.0;
        centers.push(c);
        scales.push(if is_const { 1.0 } else { sd });
        constant.push(is_const);
        min.push(column.iter().copied().fold(f64::INFINITY, f64::min));
        max.push(column.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    let standardized = records
        .iter()
        .map(|r| EffectSizeRecord {
            study_id: r.study_id.clone(),
            y: r.y,
            var: r.var,
            x: r.x
                .iter()
                .enumerate()
                .map(|(k, &v)| (v - centers[k]) / scales[k])
                .collect(),
        })
        .collect();
    Ok(StandardizedDataset {
        records: standardized,
        standardization: Standardization {
            names: schema.names().iter().map(|s| s.to_string()).collect(),
            centers,
            scales,
            constant,
            min,
            max,
        },
    })
}

/// One line of the descriptive-statistics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub variable: String,
    pub mean: f64,
    pub sd: f64,
    /// Set when the SD is reported as 0 because only one record was given.
    pub degenerate: bool,
}

/// Per-column means and SDs for `h2`, `var`, and every moderator, in schema
/// order.
pub fn describe(records: &[EffectSizeRecord], schema: &ModeratorSchema) -> Result<Vec<ColumnSummary>> {
    if records.is_empty() {
        return Err(Error::Empty);
    }
    let degenerate = records.len() == 1;
    let mut out = Vec::with_capacity(schema.len() + 2);
    let summary = |variable: &str, column: Vec<f64>| ColumnSummary {
        variable: variable.to_string(),
        mean: stats::mean(&column),
        sd: stats::sample_sd(&column),
        degenerate,
    };
    out.push(summary("h2", records.iter().map(|r| r.y).collect()));
    out.push(summary("var", records.iter().map(|r| r.var).collect()));
    for (k, def) in schema.entries().iter().enumerate() {
        out.push(summary(&def.name, records.iter().map(|r| r.x[k]).collect()));
    }
    Ok(out)
}

/// Writes the descriptive table as `variable,mean,SD`.
pub fn write_describe_csv<W: io::Write>(writer: W, table: &[ColumnSummary]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["variable", "mean", "SD"])?;
    for row in table {
        wtr.write_record([row.variable.as_str(), &row.mean.to_string(), &row.sd.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Loads a dataset CSV with columns `study_id, h2, var` plus every schema
/// moderator (any column order). Rows failing validation produce
/// diagnostics naming the row and offending column; a header that does not
/// carry every required column is a hard failure.
pub fn load_dataset(path: &Path, schema: &ModeratorSchema) -> Result<Vec<EffectSizeRecord>> {
    let file = std::fs::File::open(path)?;
    read_dataset(file, schema)
}

/// [`load_dataset`] over any reader.
pub fn read_dataset<R: io::Read>(reader: R, schema: &ModeratorSchema) -> Result<Vec<EffectSizeRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let id_idx = find("study_id").ok_or_else(|| Error::Header("missing column `study_id`".into()))?;
    let y_idx = find("h2").ok_or_else(|| Error::Header("missing column `h2`".into()))?;
    let var_idx = find("var").ok_or_else(|| Error::Header("missing column `var`".into()))?;
    let mut x_idx = Vec::with_capacity(schema.len());
    for def in schema.entries() {
        match find(&def.name) {
            Some(i) => x_idx.push(i),
            None => return Err(Error::Header(format!("missing moderator column `{}`", def.name))),
        }
    }

    let mut records = Vec::new();
    for (row_no, record) in rdr.records().enumerate() {
        let row = row_no + 1;
        let record = record?;
        let cell = |idx: usize, column: &str| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("").trim();
            if raw.is_empty() {
                return Err(Error::Row {
                    row,
                    column: column.into(),
                    reason: "missing value".into(),
                });
            }
            let value: f64 = raw.parse().map_err(|_| Error::Row {
                row,
                column: column.into(),
                reason: format!("`{raw}` is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Row {
                    row,
                    column: column.into(),
                    reason: "value is not finite".into(),
                });
            }
            Ok(value)
        };
        let y = cell(y_idx, "h2")?;
        let var = cell(var_idx, "var")?;
        let mut x = Vec::with_capacity(schema.len());
        for (k, def) in schema.entries().iter().enumerate() {
            x.push(cell(x_idx[k], &def.name)?);
        }
        let mut rec = EffectSizeRecord {
            study_id: record.get(id_idx).unwrap_or("").trim().to_string(),
            y,
            var,
            x,
        };
        if let Some(se_idx) = schema.index_of("SE") {
            // store the recomputed value when within tolerance so the
            // derived-column invariant holds exactly
            let se = rec.var.sqrt();
            if (rec.x[se_idx] - se).abs() <= 1e-6 {
                rec.x[se_idx] = se;
            }
        }
        rec.validate(schema).map_err(|reason| {
            let column = reason
                .split('`')
                .nth(1)
                .unwrap_or("-")
                .to_string();
            Error::Row { row, column, reason }
        })?;
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::Empty);
    }
    Ok(records)
}

/// Serializes records in loader column order; used for round-trip checks
/// and for writing synthetic datasets.
pub fn write_dataset_csv<W: io::Write>(
    writer: W,
    records: &[EffectSizeRecord],
    schema: &ModeratorSchema,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["study_id".to_string(), "h2".into(), "var".into()];
    header.extend(schema.names().iter().map(|s| s.to_string()));
    wtr.write_record(&header)?;
    for r in records {
        let mut row = vec![r.study_id.clone(), r.y.to_string(), r.var.to_string()];
        row.extend(r.x.iter().map(|v| v.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_schema() -> ModeratorSchema {
        ModeratorSchema::new(vec![
            ModeratorDef {
                name: "b".into(),
                kind: ModeratorKind::Binary,
                description: String::new(),
            },
            ModeratorDef {
                name: "c".into(),
                kind: ModeratorKind::Continuous,
                description: String::new(),
            },
        ])
        .unwrap()
    }

    fn rec(y: f64, var: f64, x: Vec<f64>) -> EffectSizeRecord {
        EffectSizeRecord {
            study_id: "S".into(),
            y,
            var,
            x,
        }
    }

    #[test]
    fn canonical_schema_has_29_unique_names() {
        let schema = ModeratorSchema::canonical();
        assert_eq!(schema.len(), 29);
        let names = schema.names();
        for (i, n) in names.iter().enumerate() {
            assert!(!names[..i].contains(n), "duplicate {n}");
        }
        assert_eq!(schema.index_of("SE"), Some(0));
        assert_eq!(schema.index_of("longitude"), Some(28));
    }

    #[test]
    fn standardize_direct_substitution() {
        let schema = toy_schema();
        let records = vec![
            rec(0.4, 0.01, vec![0.0, 1.0]),
            rec(0.5, 0.01, vec![0.0, 2.0]),
            rec(0.6, 0.01, vec![1.0, 3.0]),
            rec(0.7, 0.01, vec![1.0, 4.0]),
        ];
        let std = standardize(&records, &schema).unwrap();
        // binary column (0,0,1,1): sd = sqrt(1/3) ~ .5774, values +-.8660
        let v = std.records[0].x[0];
        assert!((v + 0.866_025_4).abs() < 1e-6, "{v}");
        let col: Vec<f64> = std.records.iter().map(|r| r.x[1]).collect();
        assert!(stats::mean(&col).abs() < 1e-9);
        assert!((stats::sample_variance(&col) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn standardize_is_idempotent_on_z_scores() {
        let schema = ModeratorSchema::continuous(1);
        let records = vec![
            rec(0.4, 0.01, vec![-1.161_895_003_862_225]),
            rec(0.5, 0.01, vec![-0.387_298_334_620_742]),
            rec(0.6, 0.01, vec![0.387_298_334_620_742]),
            rec(0.7, 0.01, vec![1.161_895_003_862_225]),
        ];
        let std = standardize(&records, &schema).unwrap();
        for (orig, s) in records.iter().zip(&std.records) {
            assert!((orig.x[0] - s.x[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_column_is_flagged_not_rejected() {
        let schema = toy_schema();
        let records = vec![
            rec(0.4, 0.01, vec![1.0, 5.0]),
            rec(0.5, 0.01, vec![1.0, 6.0]),
            rec(0.6, 0.01, vec![1.0, 7.0]),
        ];
        let std = standardize(&records, &schema).unwrap();
        assert!(std.standardization.constant[0]);
        assert_eq!(std.standardization.scales[0], 1.0);
        for r in &std.records {
            assert_eq!(r.x[0], 0.0);
        }
    }

    #[test]
    fn destandardize_inverts_standardize() {
        let schema = toy_schema();
        let records = vec![
            rec(0.4, 0.02, vec![0.0, 10.0]),
            rec(0.5, 0.03, vec![1.0, 20.0]),
            rec(0.6, 0.04, vec![1.0, 35.0]),
        ];
        let std = standardize(&records, &schema).unwrap();
        let back = std.destandardize();
        for (orig, rt) in records.iter().zip(&back) {
            for k in 0..orig.x.len() {
                assert!((orig.x[k] - rt.x[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn describe_direct_substitution() {
        let schema = ModeratorSchema::continuous(1);
        let records = vec![rec(0.4, 0.01, vec![1.0]), rec(0.6, 0.01, vec![2.0])];
        let table = describe(&records, &schema).unwrap();
        assert_eq!(table[0].variable, "h2");
        assert!((table[0].mean - 0.5).abs() < 1e-12);
        assert!((table[0].sd - 0.141_421_36).abs() < 1e-7);

        let single = describe(&records[..1], &schema).unwrap();
        assert_eq!(single[0].sd, 0.0);
        assert!(single[0].degenerate);

        assert!(matches!(describe(&[], &schema), Err(Error::Empty)));
    }

    #[test]
    fn describe_after_standardize_reports_zero_one() {
        let schema = toy_schema();
        let records = vec![
            rec(0.4, 0.01, vec![0.0, 1.0]),
            rec(0.5, 0.02, vec![1.0, 5.0]),
            rec(0.7, 0.03, vec![0.0, 9.0]),
        ];
        let std = standardize(&records, &schema).unwrap();
        let table = describe(&std.records, &schema).unwrap();
        for row in &table[2..] {
            assert!(row.mean.abs() < 1e-9);
            assert!((row.sd - 1.0).abs() < 1e-9);
        }
    }

    fn canonical_row(study: &str, y: f64, var: f64) -> EffectSizeRecord {
        let schema = ModeratorSchema::canonical();
        let mut x = vec![0.0; schema.len()];
        x[schema.index_of("SE").unwrap()] = var.sqrt();
        x[schema.index_of("PY").unwrap()] = 2001.0;
        x[schema.index_of("mom").unwrap()] = 1.0;
        x[schema.index_of("age").unwrap()] = 96.0 + y * 10.0;
        x[schema.index_of("white60").unwrap()] = 1.0;
        x[schema.index_of("latitude").unwrap()] = 45.0 + y;
        x[schema.index_of("longitude").unwrap()] = -70.0;
        EffectSizeRecord {
            study_id: study.into(),
            y,
            var,
            x,
        }
    }

    #[test]
    fn csv_load_round_trips_and_diagnoses() {
        let schema = ModeratorSchema::canonical();
        let records = vec![
            canonical_row("S1", 0.45, 0.010),
            canonical_row("S2", 0.62, 0.004),
            canonical_row("S3", 0.51, 0.020),
        ];
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &records, &schema).unwrap();
        let loaded = read_dataset(buf.as_slice(), &schema).unwrap();
        assert_eq!(loaded, records);

        // determinism: same bytes, same records
        let again = read_dataset(buf.as_slice(), &schema).unwrap();
        let mut ser_a = Vec::new();
        let mut ser_b = Vec::new();
        write_dataset_csv(&mut ser_a, &loaded, &schema).unwrap();
        write_dataset_csv(&mut ser_b, &again, &schema).unwrap();
        assert_eq!(ser_a, ser_b);

        // zero variance rejected with a row diagnostic
        let mut bad = records.clone();
        bad[1].var = 0.0;
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &bad, &schema).unwrap();
        match read_dataset(buf.as_slice(), &schema) {
            Err(Error::Row { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "var");
            }
            other => panic!("expected row error, got {other:?}"),
        }

        // inconsistent SE column rejected
        let mut bad = records.clone();
        bad[0].x[0] += 1e-3;
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &bad, &schema).unwrap();
        match read_dataset(buf.as_slice(), &schema) {
            Err(Error::Row { row, column, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(column, "SE");
            }
            other => panic!("expected SE error, got {other:?}"),
        }

        // empty data section
        let header_only = String::from_utf8(
            {
                let mut b = Vec::new();
                write_dataset_csv(&mut b, &[], &schema).unwrap();
                b
            },
        )
        .unwrap();
        assert!(matches!(
            read_dataset(header_only.as_bytes(), &schema),
            Err(Error::Empty)
        ));

        // header missing a moderator
        let truncated = header_only.replace(",longitude", "");
        assert!(matches!(
            read_dataset(truncated.as_bytes(), &schema),
            Err(Error::Header(_))
        ));
    }

    use crate::stats;

    proptest! {
        #[test]
        fn standardize_then_destandardize_is_identity(
            cols in proptest::collection::vec(
                proptest::collection::vec(-50.0f64..50.0, 4),
                2..6
            )
        ) {
            let p = cols.len();
            let schema = ModeratorSchema::continuous(p);
            let records: Vec<EffectSizeRecord> = (0..4)
                .map(|i| rec(0.5, 0.01, cols.iter().map(|c| c[i]).collect()))
                .collect();
            let std = standardize(&records, &schema).unwrap();
            let back = std.destandardize();
            for (orig, rt) in records.iter().zip(&back) {
                for k in 0..p {
                    prop_assert!((orig.x[k] - rt.x[k]).abs() < 1e-9);
                }
            }
        }
    }
}
