use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::verdict::KillVerdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    /// No test distinguishes the mutant's outputs and no test can φ-kill it.
    Equivalent,
    PhiTriviallyDifferent,
    NtdPhi,
    Invalid,
}

/// Why a label was assigned. φ-killability is undecidable, so every label
/// records its evidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelSource {
    /// Some executed test φ-kills the mutant.
    PhiKilled,
    /// The exhaustive grid oracle found no φ-killing test.
    Oracle,
    /// Every SBTG run ended without a φ-killing test.
    SbtgExhausted,
    Manual,
    /// Every simulation of the mutant produced a non-finite value.
    NonFinite,
    /// No evidence either way; counted as φ-killable.
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutantLabel {
    pub label: Label,
    pub source: LabelSource,
}

/// Evidence from targeted strategies about one mutant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Evidence {
    pub sbtg_exhausted: bool,
    pub oracle_not_killable: bool,
}

/// Verdicts for every `(test, mutant)` pair. `cells[t][m]` is `None` when a
/// simulation of that pair aborted on a non-finite value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KillMatrix {
    pub tests: Vec<String>,
    pub mutants: Vec<String>,
    pub cells: Vec<Vec<Option<KillVerdict>>>,
    /// Digest of the mutant's output traces per cell, when known.
    pub digests: Vec<Vec<Option<u64>>>,
    pub labels: Vec<MutantLabel>,
}

impl KillMatrix {
    /// A matrix with every mutant provisionally unresolved.
    pub fn new(tests: Vec<String>, mutants: Vec<String>, cells: Vec<Vec<Option<KillVerdict>>>) -> Self {
        let labels = vec![MutantLabel { label: Label::NtdPhi, source: LabelSource::Unresolved }; mutants.len()];
        let digests = vec![vec![None; mutants.len()]; tests.len()];
        Self { tests, mutants, cells, digests, labels }
    }

    pub fn with_digests(mut self, digests: Vec<Vec<Option<u64>>>) -> Self {
        self.digests = digests;
        self
    }

    pub fn digest(&self, t: usize, m: usize) -> Option<u64> {
        self.digests.get(t).and_then(|r| r.get(m)).copied().flatten()
    }

    /// The matrix restricted to the rows in `tests`, in that order.
    pub fn select_tests(&self, tests: &[usize]) -> KillMatrix {
        KillMatrix {
            tests: tests.iter().map(|&t| self.tests[t].clone()).collect(),
            mutants: self.mutants.clone(),
            cells: tests.iter().map(|&t| self.cells[t].clone()).collect(),
            digests: tests.iter().map(|&t| self.digests[t].clone()).collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn cell(&self, t: usize, m: usize) -> Option<&KillVerdict> {
        self.cells[t][m].as_ref()
    }

    pub fn phi_killed_by(&self, t: usize, m: usize) -> bool {
        self.cell(t, m).is_some_and(|v| v.phi)
    }

    pub fn strongly_killed_by(&self, t: usize, m: usize) -> bool {
        self.cell(t, m).is_some_and(|v| v.strong)
    }

    /// Labels each mutant from the executed verdicts and strategy evidence:
    /// φ-killed by some test gives NTD_φ; otherwise an exhausted search or an
    /// empty grid gives φ-trivially different, refined to equivalent when no
    /// test kills it strongly; a mutant whose every run aborted is invalid.
    pub fn assign_labels(&mut self, evidence: &BTreeMap<String, Evidence>) {
        for m in 0..self.mutants.len() {
            let column: Vec<Option<&KillVerdict>> = self.cells.iter().map(|row| row[m].as_ref()).collect();
            let all_failed = !column.is_empty() && column.iter().all(|c| c.is_none());
            let phi_killed = column.iter().flatten().any(|v| v.phi);
            let strong = column.iter().flatten().any(|v| v.strong);
            let ev = evidence.get(&self.mutants[m]).copied().unwrap_or_default();
            let (label, source) = if all_failed {
                (Label::Invalid, LabelSource::NonFinite)
            } else if phi_killed {
                (Label::NtdPhi, LabelSource::PhiKilled)
            } else if ev.oracle_not_killable || ev.sbtg_exhausted {
                let source = if ev.oracle_not_killable { LabelSource::Oracle } else { LabelSource::SbtgExhausted };
                let label = if strong { Label::PhiTriviallyDifferent } else { Label::Equivalent };
                (label, source)
            } else {
                (Label::NtdPhi, LabelSource::Unresolved)
            };
            self.labels[m] = MutantLabel { label, source };
        }
    }

    /// Every cell, for checking `phi ⇒ strong ⇒ weak`. Returns violating cells.
    pub fn hierarchy_violations(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (t, row) in self.cells.iter().enumerate() {
            for (m, c) in row.iter().enumerate() {
                if c.is_some_and(|v| !v.hierarchy_holds()) {
                    out.push((t, m));
                }
            }
        }
        out
    }

    /// Writes the matrix as CSV: a `test` column, then one column per mutant.
    /// Cells are `flags;rho_orig;rho_mut[;digest]` with flags drawn from `W`,
    /// `S`, `P` (`-` for none) and the output digest in hex; `X` marks an
    /// aborted simulation.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["test".to_string()];
        header.extend(self.mutants.iter().cloned());
        out.write_record(&header)?;
        for (t, row) in self.cells.iter().enumerate() {
            let mut rec = vec![self.tests[t].clone()];
            rec.extend(row.iter().enumerate().map(|(m, c)| match c {
                None => "X".to_string(),
                Some(v) => {
                    let mut flags = String::new();
                    for (on, ch) in [(v.weak, 'W'), (v.strong, 'S'), (v.phi, 'P')] {
                        if on {
                            flags.push(ch);
                        }
                    }
                    if flags.is_empty() {
                        flags.push('-');
                    }
                    match self.digest(t, m) {
                        Some(d) => format!("{flags};{};{};{d:016x}", v.rho_orig, v.rho_mut),
                        None => format!("{flags};{};{}", v.rho_orig, v.rho_mut),
                    }
                }
            }));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    /// Parses the CSV produced by [`KillMatrix::write_csv`]. Labels are not
    /// stored in the CSV and come back unresolved.
    pub fn read_csv<R: Read>(r: R) -> Result<Self, MatrixCsvError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rdr.headers()?.clone();
        if header.get(0) != Some("test") {
            return Err(MatrixCsvError::Format { row: 1, message: "first column must be `test`".into() });
        }
        let mutants: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut tests = Vec::new();
        let mut cells = Vec::new();
        let mut digests = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row_no = i + 2;
            tests.push(rec.get(0).unwrap_or_default().to_string());
            let (row, drow): (Vec<_>, Vec<_>) = rec
                .iter()
                .skip(1)
                .map(|c| parse_cell(c).ok_or_else(|| MatrixCsvError::Format { row: row_no, message: format!("bad cell `{c}`") }))
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .unzip();
            if row.len() != mutants.len() {
                return Err(MatrixCsvError::Format { row: row_no, message: "wrong number of cells".into() });
            }
            cells.push(row);
            digests.push(drow);
        }
        Ok(Self::new(tests, mutants, cells).with_digests(digests))
    }
}

fn parse_cell(c: &str) -> Option<(Option<KillVerdict>, Option<u64>)> {
    if c == "X" {
        return Some((None, None));
    }
    let mut parts = c.split(';');
    let flags = parts.next()?;
    let rho_orig: f64 = parts.next()?.parse().ok()?;
    let rho_mut: f64 = parts.next()?.parse().ok()?;
    let digest = match parts.next() {
        Some(d) => Some(u64::from_str_radix(d, 16).ok()?),
        None => None,
    };
    if parts.next().is_some() || flags.is_empty() || !flags.chars().all(|ch| matches!(ch, 'W' | 'S' | 'P' | '-')) {
        return None;
    }
    let verdict = KillVerdict {
        weak: flags.contains('W'),
        strong: flags.contains('S'),
        phi: flags.contains('P'),
        rho_orig,
        rho_mut,
    };
    Some((Some(verdict), digest))
}

#[derive(Debug, Error)]
pub enum MatrixCsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("row {row}: {message}")]
    Format { row: usize, message: String },
}
