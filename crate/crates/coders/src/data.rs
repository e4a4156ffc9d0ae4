//! Response matrices, survey designs and their CSV representations.
//!
//! Responses are small integer codes. Code 0 is reserved for missing
//! answers and is treated as an extra answer category downstream, so a
//! column with L categories takes values in 0..=L.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// How to read a responses CSV.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub delimiter: u8,
    pub has_header: bool,
    /// Cell contents (after trimming) coded as missing, i.e. as 0.
    pub missing_tokens: Vec<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            delimiter: b',',
            has_header: true,
            missing_tokens: vec![String::new(), "NA".into(), "na".into(), "N/A".into()],
        }
    }
}

/// Number of answer categories per item.
#[derive(Debug, Clone)]
pub enum Categories {
    /// Use the maximum observed code of each column.
    Infer,
    /// Every item has the same number of categories.
    Uniform(u8),
    /// One entry per item.
    PerItem(Vec<u8>),
}

/// An n x p matrix of response codes, stored row-major.
///
/// Row i is respondent i, column j is item j in presentation order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseMatrix {
    codes: Vec<u8>,
    n: usize,
    p: usize,
    categories: Vec<u8>,
}

impl ResponseMatrix {
    /// Builds a matrix from parsed rows, checking rectangularity and ranges.
    pub fn from_rows(rows: &[Vec<i64>], categories: Categories) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyInput("no response rows".into()));
        }
        let p = rows[0].len();
        if p < 2 {
            return Err(Error::Dimension(format!("need at least 2 items, found {p}")));
        }
        let caps: Option<Vec<u8>> = match &categories {
            Categories::Infer => None,
            Categories::Uniform(l) => Some(vec![*l; p]),
            Categories::PerItem(ls) => {
                if ls.len() != p {
                    return Err(Error::Dimension(format!(
                        "categories given for {} items but data has {p}",
                        ls.len()
                    )));
                }
                Some(ls.clone())
            }
        };
        let mut codes = Vec::with_capacity(n * p);
        let mut observed_max = vec![0u8; p];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::RaggedRow { row: i + 1, expected: p, found: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                let max = caps.as_ref().map_or(u8::MAX, |c| c[j]);
                if v < 0 || v > i64::from(max) {
                    return Err(Error::OutOfRange { row: i + 1, col: j + 1, value: v, max });
                }
                let v = v as u8;
                observed_max[j] = observed_max[j].max(v);
                codes.push(v);
            }
        }
        let categories = match caps {
            Some(c) => c,
            None => observed_max.clone(),
        };
        for (j, &l) in categories.iter().enumerate() {
            if l < 2 {
                return Err(Error::Dimension(format!(
                    "column {} has fewer than 2 answer categories; supply categories explicitly",
                    j + 1
                )));
            }
        }
        Ok(ResponseMatrix { codes, n, p, categories })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Per-item number of answer categories L_j.
    pub fn categories(&self) -> &[u8] {
        &self.categories
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.codes[i * self.p + j]
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.codes[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.codes.chunks_exact(self.p)
    }

    /// True if any respondent left item j unanswered.
    pub fn column_has_missing(&self, j: usize) -> bool {
        (0..self.n).any(|i| self.get(i, j) == 0)
    }

    /// Replaces row i. Used by the simulator when overwriting tail segments.
    pub(crate) fn set_row(&mut self, i: usize, row: &[u8]) {
        assert_eq!(row.len(), self.p);
        self.codes[i * self.p..(i + 1) * self.p].copy_from_slice(row);
    }

    pub(crate) fn from_parts(codes: Vec<u8>, n: usize, p: usize, categories: Vec<u8>) -> Self {
        assert_eq!(codes.len(), n * p);
        assert_eq!(categories.len(), p);
        ResponseMatrix { codes, n, p, categories }
    }
}

/// Item keying. Negatively keyed items state the opposite of their
/// construct, so attentive answers run against the construct direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keying {
    Positive,
    Negative,
}

/// Assignment of items to constructs, with keying.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurveyDesign {
    s: usize,
    construct_of_item: Vec<usize>,
    keying: Vec<Keying>,
}

impl SurveyDesign {
    pub fn new(s: usize, construct_of_item: Vec<usize>, keying: Vec<Keying>) -> Result<Self> {
        if s == 0 {
            return Err(Error::Design("need at least one construct".into()));
        }
        if construct_of_item.is_empty() {
            return Err(Error::Design("no items".into()));
        }
        if keying.len() != construct_of_item.len() {
            return Err(Error::Design(format!(
                "keying given for {} items but {} items are mapped to constructs",
                keying.len(),
                construct_of_item.len()
            )));
        }
        if let Some((j, &c)) = construct_of_item.iter().enumerate().find(|(_, &c)| c >= s) {
            return Err(Error::Design(format!(
                "item {} mapped to construct {} but only {} constructs exist",
                j + 1,
                c + 1,
                s
            )));
        }
        Ok(SurveyDesign { s, construct_of_item, keying })
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn p(&self) -> usize {
        self.construct_of_item.len()
    }

    pub fn construct_of_item(&self) -> &[usize] {
        &self.construct_of_item
    }

    pub fn keying(&self) -> &[Keying] {
        &self.keying
    }

    /// Items of each construct, in presentation order.
    pub fn items_by_construct(&self) -> Vec<Vec<usize>> {
        let mut items = vec![Vec::new(); self.s];
        for (j, &c) in self.construct_of_item.iter().enumerate() {
            items[c].push(j);
        }
        items
    }
}

/// Non-fatal findings about a matrix/design pair.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub warnings: Vec<String>,
}

/// Checks a design against a matrix. Dimension conflicts are errors;
/// everything else is reported as a warning and nothing is mutated.
pub fn validate_design(m: &ResponseMatrix, d: &SurveyDesign) -> Result<ValidationReport> {
    if d.p() != m.p() {
        return Err(Error::Dimension(format!(
            "design covers {} items but data has {}",
            d.p(),
            m.p()
        )));
    }
    let mut warnings = Vec::new();
    if d.s() == m.p() {
        warnings.push("as many constructs as items: no dimension reduction is possible".into());
    } else if (d.s() as f64) > 0.5 * m.p() as f64 {
        warnings.push(format!(
            "{} constructs for {} items leaves little room for dimension reduction",
            d.s(),
            m.p()
        ));
    }
    for (c, items) in d.items_by_construct().iter().enumerate() {
        if items.is_empty() {
            warnings.push(format!("construct {} has no items", c + 1));
        }
    }
    if d.keying().iter().all(|&k| k == Keying::Positive) {
        warnings.push(
            "no negatively keyed items: the antonym screener will find no item pairs".into(),
        );
    }
    Ok(ValidationReport { warnings })
}

/// Writes bytes to `path` via a temporary file in the same directory,
/// then renames, so readers never observe a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp: PathBuf = dir.to_path_buf();
    let stem = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    tmp.push(format!(".{stem}.tmp-{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a responses CSV. Missing tokens become code 0; every other cell
/// must parse as a non-negative integer within the category range.
pub fn load_responses(path: &Path, schema: &CsvSchema, categories: Categories) -> Result<ResponseMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_responses(&bytes, schema, categories)
}

/// Same as [`load_responses`], from an in-memory buffer.
pub fn parse_responses(bytes: &[u8], schema: &CsvSchema, categories: Categories) -> Result<ResponseMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(schema.has_header)
        .flexible(true)
        .from_reader(bytes);
    let mut rows: Vec<Vec<i64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(record.len());
        for (j, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if schema.missing_tokens.iter().any(|t| t == cell) {
                row.push(0);
            } else {
                let v: i64 = cell.parse().map_err(|_| Error::BadCell {
                    row: i + 1,
                    col: j + 1,
                    value: cell.to_string(),
                })?;
                row.push(v);
            }
        }
        rows.push(row);
    }
    ResponseMatrix::from_rows(&rows, categories)
}

/// Writes a responses CSV with an `item1..itemP` header row.
pub fn write_responses(path: &Path, m: &ResponseMatrix, schema: &CsvSchema) -> Result<()> {
    let mut out = Vec::new();
    {
        let mut w = csv::WriterBuilder::new().delimiter(schema.delimiter).from_writer(&mut out);
        if schema.has_header {
            let header: Vec<String> = (1..=m.p()).map(|j| format!("item{j}")).collect();
            w.write_record(&header)?;
        }
        for row in m.rows() {
            let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            w.write_record(&fields)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    atomic_write(path, &out)
}

/// Reads a design CSV with header `item,construct,keying`. Items and
/// constructs are numbered from 1; keying is `pos`/`neg` (also `+`/`-`).
pub fn load_design(path: &Path) -> Result<SurveyDesign> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_design(&bytes)
}

pub fn parse_design(bytes: &[u8]) -> Result<SurveyDesign> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let mut entries: Vec<(usize, usize, Keying)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() < 2 {
            return Err(Error::Design(format!("design row {}: expected item,construct[,keying]", i + 1)));
        }
        let item: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| Error::Design(format!("design row {}: bad item id {:?}", i + 1, &record[0])))?;
        let construct: usize = record[1]
            .trim()
            .parse()
            .map_err(|_| Error::Design(format!("design row {}: bad construct id {:?}", i + 1, &record[1])))?;
        let keying = match record.get(2).map(str::trim) {
            None | Some("") | Some("pos") | Some("+") | Some("positive") => Keying::Positive,
            Some("neg") | Some("-") | Some("negative") => Keying::Negative,
            Some(other) => {
                return Err(Error::Design(format!("design row {}: bad keying {:?}", i + 1, other)))
            }
        };
        if item == 0 || construct == 0 {
            return Err(Error::Design(format!("design row {}: items and constructs are numbered from 1", i + 1)));
        }
        entries.push((item - 1, construct - 1, keying));
    }
    if entries.is_empty() {
        return Err(Error::EmptyInput("design file has no rows".into()));
    }
    let p = entries.len();
    let mut construct_of_item = vec![usize::MAX; p];
    let mut keying = vec![Keying::Positive; p];
    let mut s = 0;
    for (item, construct, k) in entries {
        if item >= p {
            return Err(Error::Design(format!(
                "item id {} out of range for a {}-item design",
                item + 1,
                p
            )));
        }
        if construct_of_item[item] != usize::MAX {
            return Err(Error::Design(format!("item {} appears twice", item + 1)));
        }
        construct_of_item[item] = construct;
        keying[item] = k;
        s = s.max(construct + 1);
    }
    if let Some(missing) = construct_of_item.iter().position(|&c| c == usize::MAX) {
        return Err(Error::Design(format!("item {} is not mapped to a construct", missing + 1)));
    }
    SurveyDesign::new(s, construct_of_item, keying)
}

/// Writes a design CSV in the format accepted by [`load_design`].
pub fn write_design(path: &Path, d: &SurveyDesign) -> Result<()> {
    let mut out = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["item", "construct", "keying"])?;
        for j in 0..d.p() {
            let k = match d.keying()[j] {
                Keying::Positive => "pos",
                Keying::Negative => "neg",
            };
            w.write_record([
                (j + 1).to_string(),
                (d.construct_of_item()[j] + 1).to_string(),
                k.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    atomic_write(path, &out)
}
