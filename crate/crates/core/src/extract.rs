//! Dependency graph sources: TSV edge lists and a lexical import scanner.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::dsm::{DependencyGraph, ModuleId};
use crate::error::{Error, Result};

/// Parses `source<TAB>target` lines into a graph.
///
/// Modules are the sorted union of endpoints. A line with an empty target
/// (`source<TAB>`) declares a module without recording an edge.
pub fn load_edge_list(input: &[u8]) -> Result<DependencyGraph> {
    let text = std::str::from_utf8(input).map_err(|e| Error::Line {
        line: input[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1,
        message: "invalid UTF-8".into(),
    })?;
    let mut modules = BTreeSet::new();
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Line { line: i + 1, message };
        let (src, dst) = match line.split_once('\t') {
            Some((s, d)) if !d.contains('\t') => (s.trim(), d.trim()),
            _ => return Err(err("expected exactly one TAB between source and target".into())),
        };
        let src = ModuleId::new(src).map_err(|_| err("empty source module".into()))?;
        modules.insert(src.clone());
        if dst.is_empty() {
            continue;
        }
        let dst = ModuleId::new(dst).expect("checked non-empty");
        modules.insert(dst.clone());
        edges.push((src, dst));
    }
    Ok(DependencyGraph::new(modules.into_iter().collect(), edges))
}

/// Canonical edge-list text: sorted edges, then modules with no edges as
/// `module<TAB>` lines.
pub fn serialize_edge_list(graph: &DependencyGraph) -> String {
    let edges: BTreeSet<(&str, &str)> = graph
        .edges
        .iter()
        .filter(|(a, b)| a != b)
        .map(|(a, b)| (a.as_str(), b.as_str()))
        .collect();
    let linked: BTreeSet<&str> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    let isolated: BTreeSet<&str> = graph
        .modules
        .iter()
        .map(ModuleId::as_str)
        .filter(|m| !linked.contains(m))
        .collect();
    let mut out = String::new();
    for (a, b) in edges {
        let _ = writeln!(out, "{a}\t{b}");
    }
    for m in isolated {
        let _ = writeln!(out, "{m}\t");
    }
    out
}

/// Textual description of a language: which files it owns, how a path
/// becomes a module id and which lines are imports.
#[derive(Debug, Clone)]
pub struct LanguageProfile {
    pub name: String,
    /// Each pattern's first capture group is the imported module name.
    pub import_patterns: Vec<Regex>,
    /// Owned file suffixes, including the dot.
    pub extensions: Vec<String>,
    /// Directory prefixes stripped from paths; empty means the whole
    /// repository is a source root.
    pub source_roots: Vec<String>,
}

/// Serializable form of a profile, as written in a config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ProfileSpec {
    pub extensions: Vec<String>,
    #[serde(default)]
    pub source_roots: Vec<String>,
    pub import_patterns: Vec<String>,
}

impl LanguageProfile {
    pub fn from_spec(name: &str, spec: &ProfileSpec) -> Result<Self> {
        if spec.extensions.is_empty() {
            return Err(Error::Config(format!("profile `{name}` owns no extensions")));
        }
        let import_patterns = spec
            .import_patterns
            .iter()
            .map(|p| {
                Regex::new(p).map_err(|source| Error::Pattern {
                    pattern: p.clone(),
                    source,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut source_roots: Vec<String> = spec
            .source_roots
            .iter()
            .map(|r| r.trim_matches('/').to_owned())
            .collect();
        // longest prefix wins
        source_roots.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        Ok(LanguageProfile {
            name: name.to_owned(),
            import_patterns,
            extensions: spec.extensions.clone(),
            source_roots,
        })
    }

    /// Built-in profile for `import a.b.C;` style sources.
    pub fn java() -> Self {
        LanguageProfile::from_spec(
            "java",
            &ProfileSpec {
                extensions: vec![".java".into()],
                source_roots: vec!["src/main/java".into(), "src/test/java".into(), "src".into()],
                import_patterns: vec![
                    r"^\s*import\s+(?:static\s+)?([A-Za-z_$][\w$]*(?:\.[A-Za-z_$][\w$]*)*(?:\.\*)?)\s*;"
                        .into(),
                ],
            },
        )
        .expect("built-in profile is valid")
    }

    /// Looks up a built-in profile or one defined in `custom`.
    pub fn resolve(name: &str, custom: &BTreeMap<String, ProfileSpec>) -> Result<Self> {
        if let Some(spec) = custom.get(name) {
            return LanguageProfile::from_spec(name, spec);
        }
        match name {
            "java" => Ok(LanguageProfile::java()),
            other => Err(Error::UnknownProfile(other.to_owned())),
        }
    }

    pub fn owns(&self, path: &str) -> bool {
        self.extensions.iter().any(|e| path.ends_with(e.as_str()) && path.len() > e.len())
    }
}

fn normalize_path(path: &str) -> String {
    let p = path.replace('\\', "/");
    let mut p = p.as_str();
    while let Some(rest) = p.strip_prefix("./") {
        p = rest;
    }
    p.trim_start_matches('/').to_owned()
}

/// Canonical module id of `path`: source root stripped, extension stripped,
/// separators turned into dots. `None` for unowned files or files outside
/// every source root.
pub fn path_to_module(path: &str, profile: &LanguageProfile) -> Option<ModuleId> {
    let path = normalize_path(path);
    let ext = profile
        .extensions
        .iter()
        .filter(|e| path.ends_with(e.as_str()) && path.len() > e.len())
        .max_by_key(|e| e.len())?;
    let rel = if profile.source_roots.is_empty() {
        path.as_str()
    } else {
        profile.source_roots.iter().find_map(|root| {
            if root.is_empty() {
                Some(path.as_str())
            } else {
                path.strip_prefix(root.as_str())?.strip_prefix('/')
            }
        })?
    };
    let stem = &rel[..rel.len() - ext.len()];
    if stem.is_empty() || stem.ends_with('/') {
        return None;
    }
    ModuleId::new(stem.replace('/', ".")).ok()
}

/// Counters and warnings from a source scan.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ScanReport {
    pub profile: String,
    pub files_scanned: usize,
    pub modules: usize,
    pub edges: usize,
    pub unresolved_imports: usize,
    /// Files skipped, with the reason.
    pub skipped: Vec<(String, String)>,
    /// Files whose module id was already taken by an earlier file.
    pub duplicate_modules: Vec<(String, String)>,
}

impl ScanReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "profile: {}", self.profile);
        let _ = writeln!(out, "files scanned: {}", self.files_scanned);
        let _ = writeln!(out, "modules: {}", self.modules);
        let _ = writeln!(out, "edges: {}", self.edges);
        let _ = writeln!(out, "unresolved imports: {}", self.unresolved_imports);
        for (path, reason) in &self.skipped {
            let _ = writeln!(out, "warning: skipped {path}: {reason}");
        }
        for (path, id) in &self.duplicate_modules {
            let _ = writeln!(out, "warning: {path} duplicates module {id}");
        }
        out
    }
}

/// Resolves an imported name against known modules: exact match, `pkg.*`
/// wildcard, then successively shorter dotted prefixes (nested classes,
/// static member imports).
fn resolve_import<'m>(target: &str, modules: &'m BTreeSet<String>) -> Vec<&'m str> {
    if let Some(pkg) = target.strip_suffix(".*") {
        let prefix = format!("{pkg}.");
        return modules
            .range(prefix.clone()..)
            .take_while(|m| m.starts_with(&prefix))
            .filter(|m| !m[prefix.len()..].contains('.'))
            .map(String::as_str)
            .collect();
    }
    let mut candidate = target;
    loop {
        if let Some(m) = modules.get(candidate) {
            return vec![m.as_str()];
        }
        match candidate.rfind('.') {
            Some(cut) => candidate = &candidate[..cut],
            None => return Vec::new(),
        }
    }
}

/// Resolved import targets and the unresolved count, or a read error.
type FileScan = std::result::Result<(Vec<String>, usize), String>;

/// Scans every owned file under `root` and links each file to the modules
/// its import lines name. Imports that match no scanned module are counted
/// as unresolved.
pub fn scan_imports(root: &Path, profile: &LanguageProfile) -> Result<(DependencyGraph, ScanReport)> {
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "source root is not a directory"),
        ));
    }
    let mut report = ScanReport {
        profile: profile.name.clone(),
        ..Default::default()
    };
    // module id -> repository-relative path
    let mut owned: BTreeMap<String, String> = BTreeMap::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                let path = e
                    .path()
                    .map(|p| p.display().to_string())
                    .unwrap_or_else(|| root.display().to_string());
                report.skipped.push((path, e.to_string()));
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .unwrap_or(entry.path())
            .to_string_lossy()
            .replace('\\', "/");
        let Some(id) = path_to_module(&rel, profile) else {
            continue;
        };
        if owned.contains_key(id.as_str()) {
            report.duplicate_modules.push((rel, id.to_string()));
            continue;
        }
        owned.insert(id.to_string(), rel);
    }

    let names: BTreeSet<String> = owned.keys().cloned().collect();
    let scanned: Vec<(String, FileScan)> = owned
        .par_iter()
        .map(|(id, rel)| {
            let outcome = std::fs::read(root.join(rel))
                .map_err(|e| e.to_string())
                .map(|bytes| {
                    let text = String::from_utf8_lossy(&bytes);
                    let mut targets = Vec::new();
                    let mut unresolved = 0;
                    for line in text.lines() {
                        for pattern in &profile.import_patterns {
                            let Some(name) = pattern.captures(line).and_then(|c| c.get(1)) else {
                                continue;
                            };
                            let hits = resolve_import(name.as_str().trim(), &names);
                            if hits.is_empty() {
                                unresolved += 1;
                            }
                            targets.extend(hits.into_iter().filter(|t| t != id).map(str::to_owned));
                        }
                    }
                    (targets, unresolved)
                });
            (id.clone(), outcome)
        })
        .collect();

    let mut modules = Vec::new();
    let mut edges = Vec::new();
    for (id, outcome) in scanned {
        match outcome {
            Ok((targets, unresolved)) => {
                report.files_scanned += 1;
                report.unresolved_imports += unresolved;
                let src = ModuleId::new(id.clone()).expect("non-empty");
                for t in targets {
                    edges.push((src.clone(), ModuleId::new(t).expect("non-empty")));
                }
                modules.push(src);
            }
            Err(reason) => report.skipped.push((owned[&id].clone(), reason)),
        }
    }
    // drop edges into unreadable files
    let present: BTreeSet<&ModuleId> = modules.iter().collect();
    edges.retain(|(_, t)| present.contains(t));
    let graph = DependencyGraph::new(modules, edges);
    report.modules = graph.modules.len();
    report.edges = graph.edges.len();
    Ok((graph, report))
}
