//! Block ingestion from CSV files, directories of CSV files, or stdin.
//!
//! Every source is a sequence of segments (a file, or a blank-line
//! delimited chunk of stdin). A segment starts with a header naming `time`,
//! `status`, an optional `block` column and one or more covariates. Inside
//! a segment, runs of equal `block` values form blocks; without a `block`
//! column the whole segment is one block.
//!
//! Only the block being assembled is held in memory.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use coxstream::SubjectRecord;

/// Where blocks come from.
#[derive(Debug, Clone)]
pub enum InputSpec {
    File(PathBuf),
    Dir(PathBuf),
    Stdin,
}

impl InputSpec {
    pub fn parse(arg: &str) -> anyhow::Result<Self> {
        if arg == "-" {
            return Ok(Self::Stdin);
        }
        let path = PathBuf::from(arg);
        if path.is_dir() {
            Ok(Self::Dir(path))
        } else if path.is_file() {
            Ok(Self::File(path))
        } else {
            bail!("input '{arg}' does not exist")
        }
    }
}

/// A block as read from the input: its records, or why it was rejected.
#[derive(Debug, Clone)]
pub struct RawBlock {
    /// Source description for diagnostics, e.g. `b01.csv` or `stdin`.
    pub source: String,
    pub records: Result<Vec<SubjectRecord>, String>,
}

#[derive(Debug, Clone)]
struct Header {
    width: usize,
    time: usize,
    status: usize,
    block: Option<usize>,
    covariates: Vec<(usize, String)>,
}

impl Header {
    fn parse(fields: &[String], line: u64) -> Result<Self, String> {
        let mut time = None;
        let mut status = None;
        let mut block = None;
        let mut covariates = Vec::new();
        for (i, raw) in fields.iter().enumerate() {
            let name = raw.trim().to_ascii_lowercase();
            let slot = match name.as_str() {
                "time" => &mut time,
                "status" => &mut status,
                "block" => &mut block,
                "" => return Err(format!("malformed header: empty column name, line {line}")),
                _ => {
                    if covariates.iter().any(|(_, n)| *n == name) {
                        return Err(format!("malformed header: duplicate column '{name}', line {line}"));
                    }
                    covariates.push((i, name));
                    continue;
                }
            };
            if slot.replace(i).is_some() {
                return Err(format!("malformed header: duplicate column '{name}', line {line}"));
            }
        }
        let (Some(time), Some(status)) = (time, status) else {
            return Err(format!("malformed header: expected time,status,x1,...,xp, line {line}"));
        };
        if covariates.is_empty() {
            return Err(format!("malformed header: no covariate columns, line {line}"));
        }
        Ok(Self { width: fields.len(), time, status, block, covariates })
    }

    fn parse_row(&self, fields: &[String], line: u64) -> Result<SubjectRecord, String> {
        if fields.len() != self.width {
            return Err(format!("expected {} fields, found {}, line {line}", self.width, fields.len()));
        }
        let number = |i: usize, what: &str| -> Result<f64, String> {
            let v: f64 = fields[i]
                .trim()
                .parse()
                .map_err(|_| format!("{what} is not a number ('{}'), line {line}", fields[i].trim()))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("{what} must be finite, line {line}"))
            }
        };
        let time = number(self.time, "time")?;
        if time <= 0.0 {
            return Err(format!("time must be positive, line {line}"));
        }
        let status = match number(self.status, "status")? {
            s if s == 0.0 => false,
            s if s == 1.0 => true,
            _ => return Err(format!("status must be 0 or 1, line {line}")),
        };
        let covariates = self
            .covariates
            .iter()
            .map(|(i, name)| number(*i, &format!("covariate '{name}'")))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SubjectRecord::new(time, status, covariates))
    }
}

enum Item {
    Header { line: u64, fields: Vec<String> },
    Row { line: u64, fields: Vec<String> },
    /// End of a segment.
    Break,
}

/// Produces header/row/break items with 1-based line numbers.
trait ItemSource {
    fn next_item(&mut self) -> anyhow::Result<Option<Item>>;
    fn name(&self) -> String;
}

struct CsvFile {
    name: String,
    reader: csv::Reader<Box<dyn Read>>,
    started: bool,
    done: bool,
}

impl CsvFile {
    fn open(path: &Path) -> anyhow::Result<Self> {
        let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        let reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(Box::new(BufReader::new(file)) as Box<dyn Read>);
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(Self { name, reader, started: false, done: false })
    }
}

impl ItemSource for CsvFile {
    fn next_item(&mut self) -> anyhow::Result<Option<Item>> {
        if self.done {
            return Ok(None);
        }
        let mut rec = csv::StringRecord::new();
        let more = self.reader.read_record(&mut rec).with_context(|| format!("reading {}", self.name))?;
        if !more {
            self.done = true;
            return Ok(Some(Item::Break));
        }
        let line = rec.position().map_or(0, |p| p.line());
        let fields = rec.iter().map(str::to_string).collect();
        if self.started {
            Ok(Some(Item::Row { line, fields }))
        } else {
            self.started = true;
            Ok(Some(Item::Header { line, fields }))
        }
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

struct DirFiles {
    files: std::vec::IntoIter<PathBuf>,
    current: Option<CsvFile>,
}

impl DirFiles {
    fn open(dir: &Path) -> anyhow::Result<Self> {
        let mut files = Vec::new();
        for entry in std::fs::read_dir(dir).with_context(|| format!("cannot list {}", dir.display()))? {
            let path = entry?.path();
            if path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                files.push(path);
            }
        }
        files.sort();
        Ok(Self { files: files.into_iter(), current: None })
    }
}

impl ItemSource for DirFiles {
    fn next_item(&mut self) -> anyhow::Result<Option<Item>> {
        loop {
            if let Some(file) = &mut self.current {
                if let Some(item) = file.next_item()? {
                    return Ok(Some(item));
                }
            }
            match self.files.next() {
                Some(path) => self.current = Some(CsvFile::open(&path)?),
                None => return Ok(None),
            }
        }
    }

    fn name(&self) -> String {
        self.current.as_ref().map(|f| f.name()).unwrap_or_default()
    }
}

/// Blank-line delimited chunks. The first line of the input is the header;
/// later chunks may repeat it or go straight to data rows.
struct LineChunks<R: BufRead> {
    lines: std::io::Lines<R>,
    line: u64,
    header: Option<String>,
    in_chunk: bool,
    pending: Option<Item>,
}

impl<R: BufRead> LineChunks<R> {
    fn new(reader: R) -> Self {
        Self { lines: reader.lines(), line: 0, header: None, in_chunk: false, pending: None }
    }
}

fn split_fields(s: &str) -> Vec<String> {
    s.split(',').map(|f| f.trim().to_string()).collect()
}

impl<R: BufRead> ItemSource for LineChunks<R> {
    fn next_item(&mut self) -> anyhow::Result<Option<Item>> {
        if let Some(item) = self.pending.take() {
            return Ok(Some(item));
        }
        loop {
            let Some(text) = self.lines.next().transpose().context("reading stdin")? else {
                if self.in_chunk {
                    self.in_chunk = false;
                    return Ok(Some(Item::Break));
                }
                return Ok(None);
            };
            self.line += 1;
            let text = text.trim_end_matches('\r');
            if text.trim().is_empty() {
                if self.in_chunk {
                    self.in_chunk = false;
                    return Ok(Some(Item::Break));
                }
                continue;
            }
            let line = self.line;
            let fields = split_fields(text);
            if self.in_chunk {
                return Ok(Some(Item::Row { line, fields }));
            }
            self.in_chunk = true;
            match &self.header {
                Some(h) if h != text => {
                    let header = split_fields(h);
                    self.pending = Some(Item::Row { line, fields });
                    return Ok(Some(Item::Header { line, fields: header }));
                }
                Some(_) => return Ok(Some(Item::Header { line, fields })),
                None => {
                    self.header = Some(text.to_string());
                    return Ok(Some(Item::Header { line, fields }));
                }
            }
        }
    }

    fn name(&self) -> String {
        "stdin".to_string()
    }
}

/// Lazily yields blocks in arrival order. `Err` items are fatal I/O errors;
/// malformed content becomes a [`RawBlock`] carrying the diagnostic.
pub struct BlockReader {
    source: Box<dyn ItemSource>,
    header: Option<Result<Header, String>>,
    pending: Option<(u64, Vec<String>)>,
    records: Vec<SubjectRecord>,
    /// Rows seen in the current block, including rejected ones.
    rows: usize,
    key: Option<String>,
    error: Option<String>,
    /// A segment is in progress and its block has not been emitted.
    open: bool,
}

impl BlockReader {
    pub fn open(spec: &InputSpec) -> anyhow::Result<Self> {
        let source: Box<dyn ItemSource> = match spec {
            InputSpec::File(p) => Box::new(CsvFile::open(p)?),
            InputSpec::Dir(p) => Box::new(DirFiles::open(p)?),
            InputSpec::Stdin => Box::new(LineChunks::new(std::io::stdin().lock())),
        };
        Ok(Self::from_source(source))
    }

    #[cfg(test)]
    /// Reads blank-line delimited chunks from any buffered reader.
    pub fn from_reader<R: BufRead + 'static>(reader: R) -> Self {
        Self::from_source(Box::new(LineChunks::new(reader)))
    }

    fn from_source(source: Box<dyn ItemSource>) -> Self {
        Self { source, header: None, pending: None, records: Vec::new(), rows: 0, key: None, error: None, open: false }
    }

    fn take_block(&mut self) -> RawBlock {
        let records = std::mem::take(&mut self.records);
        let error = self.error.take();
        let rows = std::mem::take(&mut self.rows);
        self.key = None;
        self.open = false;
        let records = match (&self.header, error) {
            (Some(Err(e)), _) => Err(e.clone()),
            (_, Some(e)) => Err(e),
            _ if rows == 0 => Err("empty block".to_string()),
            _ => Ok(records),
        };
        RawBlock { source: self.source.name(), records }
    }

    fn add_row(&mut self, line: u64, fields: Vec<String>) -> Option<RawBlock> {
        self.open = true;
        let Some(Ok(header)) = &self.header else {
            return None;
        };
        let key = header.block.and_then(|b| fields.get(b)).cloned();
        if self.rows > 0 && key != self.key {
            self.pending = Some((line, fields));
            return Some(self.take_block());
        }
        self.rows += 1;
        self.key = key;
        match header.parse_row(&fields, line) {
            Ok(rec) => {
                if self.error.is_none() {
                    self.records.push(rec);
                }
            }
            Err(e) => {
                self.error.get_or_insert(e);
            }
        }
        None
    }
}

impl Iterator for BlockReader {
    type Item = anyhow::Result<RawBlock>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some((line, fields)) = self.pending.take() {
                if let Some(block) = self.add_row(line, fields) {
                    return Some(Ok(block));
                }
                continue;
            }
            match self.source.next_item() {
                Err(e) => return Some(Err(e)),
                Ok(None) => return self.open.then(|| Ok(self.take_block())),
                Ok(Some(Item::Header { line, fields })) => {
                    let flushed = self.open.then(|| self.take_block());
                    self.header = Some(Header::parse(&fields, line));
                    self.open = true;
                    if let Some(block) = flushed {
                        return Some(Ok(block));
                    }
                }
                Ok(Some(Item::Row { line, fields })) => {
                    if let Some(block) = self.add_row(line, fields) {
                        return Some(Ok(block));
                    }
                }
                Ok(Some(Item::Break)) => {
                    if self.open {
                        return Some(Ok(self.take_block()));
                    }
                }
            }
        }
    }
}
