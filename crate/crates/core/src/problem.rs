//! Problem files and decomposition artifacts.
//!
//! A problem file is line oriented; `#` starts a comment.
//!
//! ```text
//! sisdiag-problem v1
//! grid <d> <n>
//! window <K>
//! tolerances rank=<x> cluster=<x|auto> margin=<x> lower=<x|auto> fit_degree=<k>
//! generators <ℓ>
//! fiber <gen> <k_1..k_d> <m_1..m_d> <re> <im>
//! include <path>
//! operator
//! entry <i> <j> <m_1..m_d> <re> <im>
//! ```
//!
//! `fiber` adds `c e^{-2πi⟨ω,m⟩}` to component `k` of `Tφ_gen(ω)`.
//! `entry` adds the same kind of term to `A_{ij}(ω)`, the operator written
//! in the generator family: `L Σ_j x_j φ_j = Σ_i (A x)_i φ_i` fiberwise.
//! Indices are one-based. `include` pulls `fiber` and `entry` lines from
//! another file, resolved relative to the problem file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fiberize::{frame_from_generators, FiberFrame, GeneratorSet, LatticeWindow};
use crate::fields::{exp_mode, FrequencyGrid, MeasurableMask, ScalarField};
use crate::rangeop::{KernelField, RangeOperatorField};
use crate::sdiag::{SDiagonalization, SEigenpair, SymbolSequence, Tolerances};
use crate::{CMatrix, CVector, C64};

pub const PROBLEM_HEADER: &str = "sisdiag-problem v1";
pub const DECOMPOSITION_HEADER: &str = "sisdiag-decomposition v1";

#[derive(Debug, Clone, PartialEq)]
pub struct FiberTerm {
    pub generator: usize,
    pub k: Vec<i64>,
    pub m: Vec<i64>,
    pub c: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryTerm {
    pub i: usize,
    pub j: usize,
    pub m: Vec<i64>,
    pub c: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub dim: usize,
    pub n_per_dim: usize,
    pub radius: i64,
    pub tolerances: Tolerances,
    pub generators: usize,
    pub fibers: Vec<FiberTerm>,
    pub entries: Vec<EntryTerm>,
    pub includes: Vec<String>,
}

/// Everything derived from a problem file.
#[derive(Debug, Clone)]
pub struct BuiltProblem {
    pub grid: FrequencyGrid,
    pub window: LatticeWindow,
    pub generators: GeneratorSet,
    pub frame: FiberFrame,
    pub operator: RangeOperatorField,
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad {what} {s:?}"),
    })
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

struct Terms {
    fibers: Vec<FiberTerm>,
    entries: Vec<EntryTerm>,
}

fn parse_term(words: &[&str], dim: Option<usize>, line: usize, terms: &mut Terms) -> Result<bool> {
    let err = |msg: String| Error::Parse { line, msg };
    match words[0] {
        "fiber" | "entry" => {
            let d = dim.ok_or_else(|| err("grid must precede terms".into()))?;
            let fiber = words[0] == "fiber";
            let lead = if fiber { 1 + d } else { 2 };
            let want = 1 + lead + d + 2;
            if words.len() != want {
                return Err(err(format!("{} expects {} fields, found {}", words[0], want - 1, words.len() - 1)));
            }
            let ints = |range: std::ops::Range<usize>| -> Result<Vec<i64>> {
                words[range].iter().map(|w| parse_num::<i64>(w, "integer", line)).collect()
            };
            let c = C64::new(
                parse_num(words[want - 2], "real part", line)?,
                parse_num(words[want - 1], "imaginary part", line)?,
            );
            let first: usize = parse_num(words[1], "index", line)?;
            if fiber {
                terms.fibers.push(FiberTerm {
                    generator: first,
                    k: ints(2..2 + d)?,
                    m: ints(2 + d..2 + 2 * d)?,
                    c,
                });
            } else {
                terms.entries.push(EntryTerm {
                    i: first,
                    j: parse_num(words[2], "index", line)?,
                    m: ints(3..3 + d)?,
                    c,
                });
            }
            Ok(true)
        }
        _ => Ok(false),
    }
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, h)) if h == PROBLEM_HEADER => {}
            Some((no, h)) => {
                return Err(Error::Parse {
                    line: no,
                    msg: format!("expected header {PROBLEM_HEADER:?}, found {h:?}"),
                })
            }
            None => {
                return Err(Error::Parse {
                    line: 1,
                    msg: "empty problem file".into(),
                })
            }
        }
        let mut grid: Option<(usize, usize)> = None;
        let mut radius: Option<i64> = None;
        let mut tolerances = Tolerances::default();
        let mut generators: Option<usize> = None;
        let mut includes = Vec::new();
        let mut terms = Terms {
            fibers: vec![],
            entries: vec![],
        };
        for (no, line) in lines {
            let words: Vec<&str> = line.split_whitespace().collect();
            let err = |msg: String| Error::Parse { line: no, msg };
            if parse_term(&words, grid.map(|g| g.0), no, &mut terms)? {
                continue;
            }
            match words[0] {
                "grid" if words.len() == 3 => {
                    grid = Some((parse_num(words[1], "dimension", no)?, parse_num(words[2], "grid size", no)?));
                }
                "window" if words.len() == 2 => radius = Some(parse_num(words[1], "radius", no)?),
                "generators" if words.len() == 2 => {
                    generators = Some(parse_num(words[1], "generator count", no)?)
                }
                "include" if words.len() == 2 => includes.push(words[1].to_string()),
                "operator" if words.len() == 1 => {}
                "tolerances" => {
                    for kv in &words[1..] {
                        let (key, value) = kv
                            .split_once('=')
                            .ok_or_else(|| err(format!("expected key=value, found {kv:?}")))?;
                        let auto = value == "auto";
                        match key {
                            "rank" => tolerances.rank = parse_num(value, "rank tolerance", no)?,
                            "cluster" if auto => tolerances.cluster = None,
                            "cluster" => tolerances.cluster = Some(parse_num(value, "cluster tolerance", no)?),
                            "margin" => tolerances.margin = parse_num(value, "margin", no)?,
                            "lower" if auto => tolerances.lower = None,
                            "lower" => tolerances.lower = Some(parse_num(value, "lower bound", no)?),
                            "fit_degree" => tolerances.fit_degree = parse_num(value, "fit degree", no)?,
                            _ => return Err(err(format!("unknown tolerance {key:?}"))),
                        }
                    }
                }
                other => return Err(err(format!("unexpected statement {other:?}"))),
            }
        }
        let (dim, n_per_dim) = grid.ok_or(Error::Parse {
            line: 0,
            msg: "missing grid".into(),
        })?;
        let problem = Self {
            dim,
            n_per_dim,
            radius: radius.ok_or(Error::Parse {
                line: 0,
                msg: "missing window".into(),
            })?,
            tolerances,
            generators: generators.ok_or(Error::Parse {
                line: 0,
                msg: "missing generators".into(),
            })?,
            fibers: terms.fibers,
            entries: terms.entries,
            includes,
        };
        problem.check_terms(&problem.fibers, &problem.entries)?;
        problem.tolerances.validate()?;
        Ok(problem)
    }

    fn check_terms(&self, fibers: &[FiberTerm], entries: &[EntryTerm]) -> Result<()> {
        let l = self.generators;
        if l == 0 {
            return Err(Error::InvalidDecomposition("a problem needs at least one generator".into()));
        }
        let bad = |msg: String| Err(Error::Parse { line: 0, msg });
        for f in fibers {
            if f.generator == 0 || f.generator > l {
                return bad(format!("fiber term for generator {} of {l}", f.generator));
            }
            if f.k.iter().any(|x| x.abs() > self.radius) {
                return bad(format!("fiber component {:?} outside window {}", f.k, self.radius));
            }
        }
        for e in entries {
            if e.i == 0 || e.i > l || e.j == 0 || e.j > l {
                return bad(format!("operator entry ({}, {}) with {l} generators", e.i, e.j));
            }
        }
        Ok(())
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let t = &self.tolerances;
        let opt = |x: Option<f64>| x.map_or("auto".to_string(), fmt_f64);
        let _ = writeln!(out, "{PROBLEM_HEADER}");
        let _ = writeln!(out, "grid {} {}", self.dim, self.n_per_dim);
        let _ = writeln!(out, "window {}", self.radius);
        let _ = writeln!(
            out,
            "tolerances rank={} cluster={} margin={} lower={} fit_degree={}",
            fmt_f64(t.rank),
            opt(t.cluster),
            fmt_f64(t.margin),
            opt(t.lower),
            t.fit_degree
        );
        let _ = writeln!(out, "generators {}", self.generators);
        let join = |v: &[i64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        for f in &self.fibers {
            let _ = writeln!(
                out,
                "fiber {} {} {} {} {}",
                f.generator,
                join(&f.k),
                join(&f.m),
                fmt_f64(f.c.re),
                fmt_f64(f.c.im)
            );
        }
        for inc in &self.includes {
            let _ = writeln!(out, "include {inc}");
        }
        let _ = writeln!(out, "operator");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "entry {} {} {} {} {}",
                e.i,
                e.j,
                join(&e.m),
                fmt_f64(e.c.re),
                fmt_f64(e.c.im)
            );
        }
        out
    }

    /// Reads a problem file and checks that every include exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let p = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for inc in &p.includes {
            let full = base.join(inc);
            if !full.is_file() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("included file {} not found", full.display()),
                )));
            }
        }
        Ok(p)
    }

    /// Inline terms plus those of every include file under `base`.
    fn all_terms(&self, base: &Path) -> Result<(Vec<FiberTerm>, Vec<EntryTerm>)> {
        let mut terms = Terms {
            fibers: self.fibers.clone(),
            entries: self.entries.clone(),
        };
        for inc in &self.includes {
            let path: PathBuf = base.join(inc);
            let text = std::fs::read_to_string(&path)?;
            for (no, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let words: Vec<&str> = line.split_whitespace().collect();
                if !parse_term(&words, Some(self.dim), no + 1, &mut terms)? {
                    return Err(Error::Parse {
                        line: no + 1,
                        msg: format!("{}: only fiber and entry lines may be included", path.display()),
                    });
                }
            }
        }
        self.check_terms(&terms.fibers, &terms.entries)?;
        Ok((terms.fibers, terms.entries))
    }

    /// Samples generators and operator on the grid (optionally resized) and
    /// builds the frame and the range operator.
    pub fn build(&self, base: &Path, grid_override: Option<usize>) -> Result<BuiltProblem> {
        let grid = FrequencyGrid::new(self.dim, grid_override.unwrap_or(self.n_per_dim))?;
        let window = LatticeWindow::new(self.dim, self.radius)?;
        let (fibers, entries) = self.all_terms(base)?;
        let l = self.generators;
        let centers: Vec<Vec<f64>> = grid.centers().collect();

        let mut gen_fields = Vec::with_capacity(l);
        for g in 1..=l {
            let own: Vec<&FiberTerm> = fibers.iter().filter(|f| f.generator == g).collect();
            let vectors = centers
                .iter()
                .map(|w| {
                    let mut v = CVector::zeros(window.len());
                    for f in &own {
                        let idx = window.index_of(&f.k).expect("checked against the window");
                        v[idx] += f.c * exp_mode(w, &f.m);
                    }
                    v
                })
                .collect();
            gen_fields.push(crate::fields::VectorField::new(grid, vectors)?);
        }
        let generators = GeneratorSet::from_fibers(window.clone(), grid, gen_fields)?;
        let frame = frame_from_generators(&generators, self.tolerances.rank)?;
        let actions: Vec<CMatrix> = centers
            .iter()
            .map(|w| {
                let mut a = CMatrix::zeros(l, l);
                for e in &entries {
                    a[(e.i - 1, e.j - 1)] += e.c * exp_mode(w, &e.m);
                }
                a
            })
            .collect();
        let operator = RangeOperatorField::from_generator_action(frame.clone(), &actions)?;
        Ok(BuiltProblem {
            grid,
            window,
            generators,
            frame,
            operator,
        })
    }
}

fn mask_bits(mask: &MeasurableMask) -> String {
    mask.members().iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Text form of a decomposition: grid, fiber dimensions, and per pair the
/// sampled eigenvalue function, its fitted symbol, the spectrum mask and
/// the eigenspace bases in frame coordinates (column-major).
pub fn write_decomposition(dec: &SDiagonalization) -> String {
    let mut out = String::new();
    let g = dec.grid();
    let _ = writeln!(out, "{DECOMPOSITION_HEADER}");
    let _ = writeln!(out, "grid {} {}", g.dim(), g.n_per_dim());
    let dims: Vec<String> = dec.dims().iter().map(|d| d.to_string()).collect();
    let _ = writeln!(out, "dims {}", dims.join(" "));
    let _ = writeln!(out, "g {}", dec.g());
    let _ = writeln!(out, "k_r {}", fmt_f64(dec.k_r()));
    let _ = writeln!(out, "cluster_tol {}", fmt_f64(dec.cluster_tol()));
    let _ = writeln!(out, "fit_degree {}", dec.fit_degree());
    let _ = writeln!(out, "ess_sup_cb {}", fmt_f64(dec.ess_sup_cb()));
    let _ = writeln!(out, "pairs {}", dec.len());
    for (j, p) in dec.pairs().iter().enumerate() {
        let _ = writeln!(out, "pair {}", j + 1);
        let _ = writeln!(out, "spectrum {}", mask_bits(p.spectrum()));
        for (t, z) in p.lambda().values().iter().enumerate() {
            let _ = writeln!(out, "lambda {t} {} {}", fmt_f64(z.re), fmt_f64(z.im));
        }
        if let Some(s) = p.symbol() {
            let _ = writeln!(out, "symbol_residual {}", fmt_f64(s.residual()));
            for (k, c) in s.coefficients() {
                let ks: Vec<String> = k.iter().map(|x| x.to_string()).collect();
                let _ = writeln!(out, "symbol {} {} {}", ks.join(" "), fmt_f64(c.re), fmt_f64(c.im));
            }
        }
        for t in 0..g.len() {
            let b = p.eigenspace().basis(t);
            if b.ncols() == 0 {
                continue;
            }
            let _ = write!(out, "basis {t} {}", b.ncols());
            for z in b.iter() {
                let _ = write!(out, " {} {}", fmt_f64(z.re), fmt_f64(z.im));
            }
            out.push('\n');
        }
    }
    out
}

struct PairDraft {
    spectrum: Option<Vec<bool>>,
    lambda: Vec<Option<C64>>,
    residual: Option<f64>,
    symbol: Vec<(Vec<i64>, C64)>,
    bases: Vec<Option<CMatrix>>,
}

/// Inverse of [`write_decomposition`].
pub fn read_decomposition(text: &str) -> Result<SDiagonalization> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, h)) if h == DECOMPOSITION_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header {DECOMPOSITION_HEADER:?}"),
            })
        }
    }
    let mut grid: Option<FrequencyGrid> = None;
    let mut dims: Vec<usize> = vec![];
    let (mut g, mut k_r, mut cluster_tol, mut fit_degree, mut ess) = (0usize, 0.0, 0.0, 0i64, 0.0);
    let mut pairs: Vec<PairDraft> = vec![];
    for (no, line) in lines {
        let w: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: String| Error::Parse { line: no, msg };
        let need_grid = || grid.ok_or_else(|| err("grid must come first".into()));
        let cur = |pairs: &mut Vec<PairDraft>| -> Result<usize> {
            if pairs.is_empty() {
                Err(Error::Parse {
                    line: no,
                    msg: "pair data before any pair".into(),
                })
            } else {
                Ok(pairs.len() - 1)
            }
        };
        match w[0] {
            "grid" if w.len() == 3 => {
                grid = Some(FrequencyGrid::new(parse_num(w[1], "dimension", no)?, parse_num(w[2], "size", no)?)?)
            }
            "dims" => {
                dims = w[1..].iter().map(|x| parse_num(x, "dimension", no)).collect::<Result<_>>()?;
            }
            "g" => g = parse_num(w[1], "g", no)?,
            "k_r" => k_r = parse_num(w[1], "k_r", no)?,
            "cluster_tol" => cluster_tol = parse_num(w[1], "cluster_tol", no)?,
            "fit_degree" => fit_degree = parse_num(w[1], "fit_degree", no)?,
            "ess_sup_cb" => ess = parse_num(w[1], "ess_sup_cb", no)?,
            "pairs" => {}
            "pair" => {
                let grid = need_grid()?;
                pairs.push(PairDraft {
                    spectrum: None,
                    lambda: vec![None; grid.len()],
                    residual: None,
                    symbol: vec![],
                    bases: vec![None; grid.len()],
                });
            }
            "spectrum" if w.len() == 2 => {
                let j = cur(&mut pairs)?;
                pairs[j].spectrum = Some(w[1].chars().map(|c| c == '1').collect());
            }
            "lambda" if w.len() == 4 => {
                let j = cur(&mut pairs)?;
                let t: usize = parse_num(w[1], "cell", no)?;
                let z = C64::new(parse_num(w[2], "real part", no)?, parse_num(w[3], "imaginary part", no)?);
                *pairs[j].lambda.get_mut(t).ok_or_else(|| err(format!("cell {t} out of range")))? = Some(z);
            }
            "symbol_residual" => {
                let j = cur(&mut pairs)?;
                pairs[j].residual = Some(parse_num(w[1], "residual", no)?);
            }
            "symbol" => {
                let j = cur(&mut pairs)?;
                let d = need_grid()?.dim();
                if w.len() != d + 3 {
                    return Err(err("symbol line length".into()));
                }
                let k = w[1..=d].iter().map(|x| parse_num(x, "index", no)).collect::<Result<_>>()?;
                let c = C64::new(parse_num(w[d + 1], "real part", no)?, parse_num(w[d + 2], "imaginary part", no)?);
                pairs[j].symbol.push((k, c));
            }
            "basis" => {
                let j = cur(&mut pairs)?;
                let t: usize = parse_num(w[1], "cell", no)?;
                let cols: usize = parse_num(w[2], "column count", no)?;
                let n = *dims.get(t).ok_or_else(|| err("dims must precede bases".into()))?;
                if w.len() != 3 + 2 * n * cols {
                    return Err(err(format!("basis at cell {t} needs {} numbers", 2 * n * cols)));
                }
                let vals: Vec<f64> = w[3..].iter().map(|x| parse_num(x, "number", no)).collect::<Result<_>>()?;
                let data: Vec<C64> = vals.chunks(2).map(|c| C64::new(c[0], c[1])).collect();
                let slot = pairs[j].bases.get_mut(t).ok_or_else(|| err(format!("cell {t} out of range")))?;
                *slot = Some(CMatrix::from_column_slice(n, cols, &data));
            }
            other => return Err(err(format!("unexpected line {other:?}"))),
        }
    }
    let grid = grid.ok_or(Error::Parse {
        line: 0,
        msg: "missing grid".into(),
    })?;
    if dims.len() != grid.len() {
        return Err(Error::InvalidDecomposition("dims line length".into()));
    }
    let mut out = Vec::with_capacity(pairs.len());
    for (j, p) in pairs.into_iter().enumerate() {
        let bits = p.spectrum.ok_or_else(|| Error::InvalidDecomposition(format!("pair {} lacks a spectrum", j + 1)))?;
        let spectrum = MeasurableMask::from_members(grid, bits)?;
        let lambda: Vec<C64> = p
            .lambda
            .into_iter()
            .enumerate()
            .map(|(t, z)| z.ok_or_else(|| Error::InvalidDecomposition(format!("pair {} lacks λ at cell {t}", j + 1))))
            .collect::<Result<_>>()?;
        let bases: Vec<CMatrix> = p
            .bases
            .into_iter()
            .enumerate()
            .map(|(t, b)| b.unwrap_or_else(|| CMatrix::zeros(dims[t], 0)))
            .collect();
        let space = KernelField::from_bases(grid, dims.clone(), bases)?;
        let symbol = match p.residual {
            Some(r) => Some(SymbolSequence::from_coefficients(grid, p.symbol)?.with_residual(r)),
            None => None,
        };
        out.push(SEigenpair::new(ScalarField::new(grid, lambda)?, symbol, space, spectrum));
    }
    SDiagonalization::from_parts(grid, dims, out, g, k_r, cluster_tol, fit_degree, ess)
}
