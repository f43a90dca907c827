use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use super::{
    validate_constraints, Dataset, Sample, CATEGORICAL_COLUMNS, CONTINUOUS_COLUMNS,
    N_CATEGORICAL, N_CONTINUOUS,
};
use crate::error::{Error, Result};

/// Maps CSV column names to sample roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub continuous: Vec<String>,
    pub categorical: Vec<String>,
    pub treatment: String,
    pub conversion: String,
    pub visit: String,
    pub exposure: String,
    #[serde(default)]
    pub outcome: Option<String>,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            continuous: CONTINUOUS_COLUMNS.iter().map(|s| s.to_string()).collect(),
            categorical: CATEGORICAL_COLUMNS.iter().map(|s| s.to_string()).collect(),
            treatment: "treatment".into(),
            conversion: "conversion".into(),
            visit: "visit".into(),
            exposure: "exposure".into(),
            outcome: None,
        }
    }
}

impl Schema {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let schema: Schema = toml::from_str(s).map_err(|e| Error::Schema(e.to_string()))?;
        if schema.continuous.len() != N_CONTINUOUS || schema.categorical.len() != N_CATEGORICAL {
            return Err(Error::Schema(format!(
                "expected {N_CONTINUOUS} continuous and {N_CATEGORICAL} categorical columns, got {} and {}",
                schema.continuous.len(),
                schema.categorical.len()
            )));
        }
        Ok(schema)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

struct Columns {
    continuous: [usize; N_CONTINUOUS],
    categorical: [usize; N_CATEGORICAL],
    treatment: usize,
    conversion: usize,
    visit: usize,
    exposure: usize,
    outcome: Option<usize>,
}

fn resolve(header: &csv::StringRecord, schema: &Schema) -> Result<Columns> {
    let pos: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    let find = |name: &str| {
        pos.get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let mut continuous = [0; N_CONTINUOUS];
    for (slot, name) in continuous.iter_mut().zip(&schema.continuous) {
        *slot = find(name)?;
    }
    let mut categorical = [0; N_CATEGORICAL];
    for (slot, name) in categorical.iter_mut().zip(&schema.categorical) {
        *slot = find(name)?;
    }
    Ok(Columns {
        continuous,
        categorical,
        treatment: find(&schema.treatment)?,
        conversion: find(&schema.conversion)?,
        visit: find(&schema.visit)?,
        exposure: find(&schema.exposure)?,
        outcome: schema.outcome.as_deref().map(find).transpose()?,
    })
}

fn open(path: &Path, gzip: bool) -> Result<Box<dyn Read>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::with_capacity(1 << 20, file);
    Ok(if gzip {
        Box::new(MultiGzDecoder::new(reader))
    } else {
        Box::new(reader)
    })
}

/// Loads a corpus in the default column layout.
pub fn load_csv(path: impl AsRef<Path>, gzip: bool) -> Result<Dataset> {
    load_csv_with_schema(path, gzip, &Schema::default())
}

/// Loads a corpus whose column roles are given by `schema`.
///
/// Constraint violations are logged, not rejected; call
/// [`validate_constraints`] for the counts. Categorical cells that are not
/// non-negative integers (the public file stores hashed floats) are interned
/// per column in order of first appearance.
pub fn load_csv_with_schema(path: impl AsRef<Path>, gzip: bool, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(open(path, gzip)?);
    let header = rdr.headers()?.clone();
    let cols = resolve(&header, schema)?;

    let mut interned: Vec<HashMap<u64, u32>> = vec![HashMap::new(); N_CATEGORICAL];
    let mut samples = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut row = 0usize;
    while rdr.read_record(&mut record)? {
        row += 1;
        let cell = |idx: usize| record.get(idx).unwrap_or("").trim();
        let parse_err = |idx: usize| Error::Parse {
            row,
            column: header.get(idx).unwrap_or("?").to_string(),
            value: record.get(idx).unwrap_or("").to_string(),
        };
        let real = |idx: usize| -> Result<f64> {
            cell(idx)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(idx))
        };
        let flag = |idx: usize| -> Result<bool> {
            match real(idx)? {
                v if v == 0.0 => Ok(false),
                v if v == 1.0 => Ok(true),
                _ => Err(parse_err(idx)),
            }
        };

        let mut continuous = [0.0; N_CONTINUOUS];
        for (v, &idx) in continuous.iter_mut().zip(&cols.continuous) {
            *v = real(idx)?;
        }
        let mut categorical = [0u32; N_CATEGORICAL];
        for (j, (v, &idx)) in categorical.iter_mut().zip(&cols.categorical).enumerate() {
            *v = match cell(idx).parse::<u32>() {
                Ok(code) => code,
                Err(_) => {
                    let x = real(idx)?;
                    let table = &mut interned[j];
                    let next = table.len() as u32;
                    *table.entry(x.to_bits()).or_insert(next)
                }
            };
        }
        samples.push(Sample {
            continuous,
            categorical,
            treatment: flag(cols.treatment)?,
            exposure: flag(cols.exposure)?,
            visit: flag(cols.visit)?,
            conversion: flag(cols.conversion)?,
            outcome: cols.outcome.map(real).transpose()?,
        });
    }

    let dataset = Dataset::new(samples);
    let report = validate_constraints(&dataset);
    if !report.is_clean() {
        log::warn!(
            "{}: {} control rows exposed, {} conversions without visit",
            path.display(),
            report.control_exposed,
            report.conversion_without_visit
        );
    }
    Ok(dataset)
}

/// Writes the default layout `f0..f11,treatment,conversion,visit,exposure`,
/// plus a trailing `y` column when every sample carries an outcome.
pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>, gzip: bool) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let sink: Box<dyn Write> = if gzip {
        Box::new(GzEncoder::new(BufWriter::new(file), Compression::default()))
    } else {
        Box::new(BufWriter::new(file))
    };
    let mut w = csv::Writer::from_writer(sink);
    let with_outcome = dataset.has_outcome();

    let mut header: Vec<String> = (0..12).map(|i| format!("f{i}")).collect();
    header.extend(["treatment", "conversion", "visit", "exposure"].map(String::from));
    if with_outcome {
        header.push("y".into());
    }
    w.write_record(&header)?;

    // feature index -> (is continuous, slot)
    let mut layout = [(false, 0usize); 12];
    for (slot, name) in CONTINUOUS_COLUMNS.iter().enumerate() {
        layout[name[1..].parse::<usize>().unwrap()] = (true, slot);
    }
    for (slot, name) in CATEGORICAL_COLUMNS.iter().enumerate() {
        layout[name[1..].parse::<usize>().unwrap()] = (false, slot);
    }
    let bit = |b: bool| if b { "1".to_string() } else { "0".to_string() };

    let mut rec = Vec::with_capacity(header.len());
    for s in dataset.samples() {
        rec.clear();
        for &(cont, slot) in &layout {
            rec.push(if cont {
                s.continuous[slot].to_string()
            } else {
                s.categorical[slot].to_string()
            });
        }
        rec.extend([bit(s.treatment), bit(s.conversion), bit(s.visit), bit(s.exposure)]);
        if with_outcome {
            rec.push(s.outcome.unwrap_or(f64::NAN).to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "f0,f1,f2,f3,f4,f5,f6,f7,f8,f9,f10,f11,treatment,conversion,visit,exposure";

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_three_rows() {
        let body = format!(
            "{HEADER}\n\
             1.5,3,0.25,1,2,3,4,-1,5,6,2.5,7,1,0,1,1\n\
             0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0\n\
             2,9,1,1,1,1,1,1,1,1,1,1,1,1,1,0\n"
        );
        let f = write_tmp(&body);
        let d = load_csv(f.path(), false).unwrap();
        assert_eq!(d.len(), 3);
        let s = &d.samples()[0];
        assert_eq!(s.continuous, [1.5, 0.25, -1.0, 2.5]);
        assert_eq!(s.categorical, [3, 1, 2, 3, 4, 5, 6, 7]);
        assert!(s.treatment && s.exposure && s.visit && !s.conversion);
        assert!((d.treatment_ratio() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn missing_treatment_column_is_named() {
        let f = write_tmp("f0,f1,f2,f3,f4,f5,f6,f7,f8,f9,f10,f11,conversion,visit,exposure\n");
        match load_csv(f.path(), false) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "treatment"),
            other => panic!("expected missing column, got {other:?}"),
        }
    }

    #[test]
    fn bad_cell_reports_row() {
        let body = format!("{HEADER}\n0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0\n0,0,0,0,0,0,0,0,0,0,0,0,2,0,0,0\n");
        let f = write_tmp(&body);
        match load_csv(f.path(), false) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "treatment");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn constraint_violations_still_load() {
        let body = format!("{HEADER}\n0,0,0,0,0,0,0,0,0,0,0,0,0,1,0,1\n");
        let f = write_tmp(&body);
        let d = load_csv(f.path(), false).unwrap();
        let r = validate_constraints(&d);
        assert_eq!((r.control_exposed, r.conversion_without_visit), (1, 1));
    }

    #[test]
    fn float_categoricals_are_interned() {
        let body = format!(
            "{HEADER}\n\
             0,10.5,0,0,0,0,0,0,0,0,0,0,0,0,0,0\n\
             0,3.25,0,0,0,0,0,0,0,0,0,0,0,0,0,0\n\
             0,10.5,0,0,0,0,0,0,0,0,0,0,0,0,0,0\n"
        );
        let f = write_tmp(&body);
        let d = load_csv(f.path(), false).unwrap();
        let codes: Vec<u32> = d.samples().iter().map(|s| s.categorical[0]).collect();
        assert_eq!(codes, vec![0, 1, 0]);
    }

    #[test]
    fn gzip_and_schema_round_trip() {
        let body = format!("{HEADER}\n1.5,3,0.25,1,2,3,4,-1,5,6,2.5,7,1,0,1,1\n");
        let f = write_tmp(&body);
        let d = load_csv(f.path(), false).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let gz = dir.path().join("d.csv.gz");
        write_csv(&d, &gz, true).unwrap();
        assert_eq!(load_csv(&gz, true).unwrap(), d);

        let schema = Schema::from_toml_str(
            r#"
            continuous = ["a", "b", "c", "d"]
            categorical = ["c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8"]
            treatment = "t"
            conversion = "conv"
            visit = "v"
            exposure = "e"
            outcome = "y"
            "#,
        )
        .unwrap();
        let custom = write_tmp("y,t,conv,v,e,a,b,c,d,c1,c2,c3,c4,c5,c6,c7,c8\n0.5,1,0,1,0,1,2,3,4,1,2,3,4,5,6,7,8\n");
        let d = load_csv_with_schema(custom.path(), false, &schema).unwrap();
        let s = &d.samples()[0];
        assert_eq!(s.continuous, [1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.categorical, [1, 2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(s.outcome, Some(0.5));
    }
}
