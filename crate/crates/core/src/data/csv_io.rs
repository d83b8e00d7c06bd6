use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Trim};

use super::{Dataset, Label};
use crate::error::{Error, Result};

/// Column roles for [`load_higgs_csv`]. Every column not named here is a feature.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    pub label_column: String,
    pub weight_column: Option<String>,
    pub id_column: Option<String>,
    pub split_column: Option<String>,
    pub ignore_columns: Vec<String>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            label_column: "Label".into(),
            weight_column: Some("Weight".into()),
            id_column: Some("EventId".into()),
            split_column: None,
            ignore_columns: Vec::new(),
        }
    }
}

/// Accepted values of a split column, by partition.
pub const PARTITION_TAGS: [(&str, &[&str]); 3] = [
    ("train", &["t", "train"]),
    ("validation", &["b", "validation"]),
    ("test", &["v", "test"]),
];

enum Role {
    Feature,
    Label,
    Weight,
    Id,
    Split,
    Ignored,
}

/// Reads a Higgs-challenge style CSV.
///
/// Labels `s`/`b` map to signal/background. The `-999.0` placeholder for
/// undefined physics quantities is kept as an ordinary value.
pub fn load_higgs_csv(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(Trim::All)
        .from_reader(file);

    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: format!("cannot read header: {e}"),
        })?
        .clone();
    if headers.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "header row is empty".into(),
        });
    }

    let roles = assign_roles(&headers, opts)?;
    let feature_names: Vec<String> = headers
        .iter()
        .zip(&roles)
        .filter(|(_, r)| matches!(r, Role::Feature))
        .map(|(h, _)| h.to_string())
        .collect();
    if feature_names.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no feature columns".into(),
        });
    }

    let d = feature_names.len();
    let mut rows: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    let mut weights = Vec::new();
    let mut ids = Vec::new();
    let mut tags = Vec::new();
    let mut record = StringRecord::new();
    loop {
        let more = reader.read_record(&mut record).map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != headers.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} columns, found {}", headers.len(), record.len()),
            });
        }
        let mut label = None;
        for ((field, role), name) in record.iter().zip(&roles).zip(headers.iter()) {
            match role {
                Role::Feature => rows.push(parse_number(field, name, line)?),
                Role::Weight => weights.push(parse_number(field, name, line)?),
                Role::Label => {
                    label = Some(match field {
                        "s" => Label::Signal,
                        "b" => Label::Background,
                        other => {
                            return Err(Error::UnknownLabel {
                                line,
                                token: other.to_string(),
                            })
                        }
                    })
                }
                Role::Id => ids.push(field.to_string()),
                Role::Split => tags.push(field.to_string()),
                Role::Ignored => {}
            }
        }
        labels.extend(label);
    }

    let n = labels.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0)) {
        return Err(Error::Parse {
            line: i as u64 + 2,
            message: format!("negative event weight {w}"),
        });
    }

    let mut columns = vec![0.0; n * d];
    for (i, row) in rows.chunks_exact(d).enumerate() {
        for (j, &v) in row.iter().enumerate() {
            columns[j * n + i] = v;
        }
    }
    let ds = Dataset::from_columns(
        columns,
        n,
        feature_names,
        labels,
        opts.weight_column.as_ref().map(|_| weights),
        opts.id_column.as_ref().map(|_| ids),
    )?;
    Ok(ds.with_tags(opts.split_column.as_ref().map(|_| tags)))
}

fn assign_roles(headers: &StringRecord, opts: &LoadOptions) -> Result<Vec<Role>> {
    let mut roles: Vec<Role> = headers
        .iter()
        .map(|h| {
            if h == opts.label_column {
                Role::Label
            } else if opts.weight_column.as_deref() == Some(h) {
                Role::Weight
            } else if opts.id_column.as_deref() == Some(h) {
                Role::Id
            } else if opts.split_column.as_deref() == Some(h) {
                Role::Split
            } else if opts.ignore_columns.iter().any(|c| c == h) {
                Role::Ignored
            } else {
                Role::Feature
            }
        })
        .collect();

    let require = |name: &str| -> Result<()> {
        if headers.iter().any(|h| h == name) {
            Ok(())
        } else {
            Err(Error::Parse {
                line: 1,
                message: format!("header has no column named {name:?}"),
            })
        }
    };
    require(&opts.label_column)?;
    for name in [&opts.weight_column, &opts.id_column, &opts.split_column]
        .into_iter()
        .flatten()
    {
        require(name)?;
    }
    // A column listed twice keeps its first role only.
    let mut seen = std::collections::HashSet::new();
    for (h, r) in headers.iter().zip(roles.iter_mut()) {
        if !seen.insert(h) {
            *r = Role::Ignored;
        }
    }
    Ok(roles)
}

fn parse_number(field: &str, column: &str, line: u64) -> Result<f64> {
    field.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("column {column:?}: {field:?} is not a number"),
    })
}

/// Writes `ds` in the format [`load_higgs_csv`] reads with default options.
///
/// Numbers use the shortest representation that parses back to the same bits.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_csv_to(ds, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

fn write_csv_to(ds: &Dataset, out: &mut impl Write) -> std::io::Result<()> {
    write!(out, "EventId")?;
    for name in ds.feature_names() {
        write!(out, ",{name}")?;
    }
    writeln!(out, ",Weight,Label")?;
    for i in 0..ds.len() {
        write!(out, "{}", ds.ids()[i])?;
        for j in 0..ds.n_features() {
            write!(out, ",{:?}", ds.value(i, j))?;
        }
        let label = if ds.labels()[i].is_signal() { "s" } else { "b" };
        writeln!(out, ",{:?},{label}", ds.event_weights()[i])?;
    }
    Ok(())
}
