//! Statement and branch coverage per function, file and project.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ir::{IrModule, PointId, PointKind};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FunctionCoverage {
    pub file: String,
    pub stmt_total: u32,
    pub branch_total: u32,
    pub stmt_covered: BTreeSet<PointId>,
    pub branch_covered: BTreeSet<PointId>,
}

/// Covered point sets with their denominators. File and project rows are
/// computed on demand from the function entries.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CoverageMap {
    pub functions: BTreeMap<String, FunctionCoverage>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CoverageError {
    #[error("coverage for {func} was built against a different module ({detail})")]
    DenominatorMismatch { func: String, detail: String },
}

/// One report line. Percentages are strings so that `n/a` fits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CoverageRow {
    pub name: String,
    pub stmt_covered: u32,
    pub stmt_total: u32,
    pub stmt_pct: String,
    pub branch_covered: u32,
    pub branch_total: u32,
    pub branch_pct: String,
}

/// Ratio as a percentage with two decimals, rounded half-up.
pub fn percent(covered: u32, total: u32) -> String {
    if total == 0 {
        return "n/a".to_string();
    }
    let hundredths = (covered as u64 * 20_000 + total as u64) / (2 * total as u64);
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

impl CoverageMap {
    /// Coverage of the named functions in `m` given a set of covered points.
    /// Error edges are not part of either denominator.
    pub fn from_points<'a>(
        m: &IrModule,
        functions: impl IntoIterator<Item = &'a str>,
        covered: &BTreeSet<PointId>,
    ) -> CoverageMap {
        let mut out = CoverageMap::default();
        for name in functions {
            let Some(f) = m.function(name) else { continue };
            let mut fc = FunctionCoverage {
                file: f.file.clone(),
                ..Default::default()
            };
            for p in m.points_of(name).filter(|p| !p.is_error_edge) {
                let hit = covered.contains(&p.id);
                match p.kind {
                    PointKind::Stmt => {
                        fc.stmt_total += 1;
                        if hit {
                            fc.stmt_covered.insert(p.id);
                        }
                    }
                    PointKind::Branch => {
                        fc.branch_total += 1;
                        if hit {
                            fc.branch_covered.insert(p.id);
                        }
                    }
                }
            }
            out.functions.insert(name.to_string(), fc);
        }
        out
    }

    pub fn merge(&self, other: &CoverageMap) -> Result<CoverageMap, CoverageError> {
        let mut out = self.clone();
        for (name, b) in &other.functions {
            match out.functions.get_mut(name) {
                None => {
                    out.functions.insert(name.clone(), b.clone());
                }
                Some(a) => {
                    if (a.stmt_total, a.branch_total, &a.file) != (b.stmt_total, b.branch_total, &b.file) {
                        return Err(CoverageError::DenominatorMismatch {
                            func: name.clone(),
                            detail: format!(
                                "{}:{}/{} vs {}:{}/{}",
                                a.file, a.stmt_total, a.branch_total, b.file, b.stmt_total, b.branch_total
                            ),
                        });
                    }
                    a.stmt_covered.extend(b.stmt_covered.iter().copied());
                    a.branch_covered.extend(b.branch_covered.iter().copied());
                }
            }
        }
        Ok(out)
    }

    fn row<'a>(name: &str, fs: impl Iterator<Item = &'a FunctionCoverage>) -> CoverageRow {
        let (mut sc, mut st, mut bc, mut bt) = (0, 0, 0, 0);
        for f in fs {
            sc += f.stmt_covered.len() as u32;
            st += f.stmt_total;
            bc += f.branch_covered.len() as u32;
            bt += f.branch_total;
        }
        CoverageRow {
            name: name.to_string(),
            stmt_covered: sc,
            stmt_total: st,
            stmt_pct: percent(sc, st),
            branch_covered: bc,
            branch_total: bt,
            branch_pct: percent(bc, bt),
        }
    }

    pub fn function_rows(&self) -> Vec<CoverageRow> {
        self.functions
            .iter()
            .map(|(n, f)| Self::row(n, std::iter::once(f)))
            .collect()
    }

    pub fn file_rows(&self) -> Vec<CoverageRow> {
        let files: BTreeSet<&str> = self.functions.values().map(|f| f.file.as_str()).collect();
        files
            .into_iter()
            .map(|file| Self::row(file, self.functions.values().filter(|f| f.file == file)))
            .collect()
    }

    pub fn totals(&self) -> CoverageRow {
        Self::row("total", self.functions.values())
    }
}

/// Function, file and project rows in one call.
pub fn percentages(c: &CoverageMap) -> (Vec<CoverageRow>, Vec<CoverageRow>, CoverageRow) {
    (c.function_rows(), c.file_rows(), c.totals())
}
