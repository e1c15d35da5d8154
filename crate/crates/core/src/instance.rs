//! Problem data for the Steiner tree problem with revenues, budget and hop
//! constraints, plus the STP text container and a benchmark-style generator.
//!
//! Node ids are 0-based everywhere in this crate. STP files use 1-based ids;
//! the reader subtracts one and the writer adds one, nothing else changes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Header line emitted by [`write_stp`].
pub const STP_HEADER: &str = "33D32945 STP File, STP Format Version 1.0";

/// An undirected edge, stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub cost: f64,
}

impl Edge {
    /// The endpoint opposite to `w`.
    pub fn other(&self, w: usize) -> usize {
        if self.u == w {
            self.v
        } else {
            self.u
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("instance has no nodes")]
    NoNodes,
    #[error("edge {0}-{1} is a self-loop")]
    SelfLoop(usize, usize),
    #[error("edge {0}-{1} appears more than once")]
    DuplicateEdge(usize, usize),
    #[error("node {node} is out of range (instance has {node_count} nodes)")]
    NodeOutOfRange { node: usize, node_count: usize },
    #[error("edge {u}-{v} has cost {cost}, costs must be finite and positive")]
    NonPositiveCost { u: usize, v: usize, cost: f64 },
    #[error("node {node} has revenue {revenue}, revenues must be finite and nonnegative")]
    BadRevenue { node: usize, revenue: f64 },
    #[error("revenue vector has {got} entries, expected {expected}")]
    RevenueCount { got: usize, expected: usize },
    #[error("budget {0} must be finite and nonnegative")]
    BadBudget(f64),
    #[error("hop limit must be at least 1")]
    ZeroHopLimit,
    #[error("instance name may not contain quotes or line breaks")]
    BadName,
}

/// A validated STPRBH instance. Immutable once built.
///
/// Edges are normalized to `u < v` and sorted by `(u, v)`, so two instances
/// describing the same graph compare equal regardless of input edge order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Instance {
    name: String,
    node_count: usize,
    edges: Vec<Edge>,
    revenues: Vec<f64>,
    root: usize,
    budget: f64,
    hop_limit: usize,
    #[serde(skip)]
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Instance {
    pub fn new(
        name: impl Into<String>,
        node_count: usize,
        edges: Vec<Edge>,
        revenues: Vec<f64>,
        root: usize,
        budget: f64,
        hop_limit: usize,
    ) -> Result<Self, InstanceError> {
        let name = name.into();
        if name.contains(['"', '\n', '\r']) {
            return Err(InstanceError::BadName);
        }
        if node_count == 0 {
            return Err(InstanceError::NoNodes);
        }
        if root >= node_count {
            return Err(InstanceError::NodeOutOfRange { node: root, node_count });
        }
        if revenues.len() != node_count {
            return Err(InstanceError::RevenueCount { got: revenues.len(), expected: node_count });
        }
        for (node, &revenue) in revenues.iter().enumerate() {
            if !revenue.is_finite() || revenue < 0.0 {
                return Err(InstanceError::BadRevenue { node, revenue });
            }
        }
        if !budget.is_finite() || budget < 0.0 {
            return Err(InstanceError::BadBudget(budget));
        }
        if hop_limit == 0 {
            return Err(InstanceError::ZeroHopLimit);
        }

        let mut normalized = Vec::with_capacity(edges.len());
        for e in edges {
            for node in [e.u, e.v] {
                if node >= node_count {
                    return Err(InstanceError::NodeOutOfRange { node, node_count });
                }
            }
            if e.u == e.v {
                return Err(InstanceError::SelfLoop(e.u, e.v));
            }
            if !e.cost.is_finite() || e.cost <= 0.0 {
                return Err(InstanceError::NonPositiveCost { u: e.u, v: e.v, cost: e.cost });
            }
            normalized.push(Edge { u: e.u.min(e.v), v: e.u.max(e.v), cost: e.cost });
        }
        normalized.sort_by_key(|e| (e.u, e.v));
        for pair in normalized.windows(2) {
            if (pair[0].u, pair[0].v) == (pair[1].u, pair[1].v) {
                return Err(InstanceError::DuplicateEdge(pair[0].u, pair[0].v));
            }
        }

        let mut adjacency = vec![Vec::new(); node_count];
        for (idx, e) in normalized.iter().enumerate() {
            adjacency[e.u].push((e.v, idx));
            adjacency[e.v].push((e.u, idx));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }

        Ok(Instance { name, node_count, edges: normalized, revenues, root, budget, hop_limit, adjacency })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn revenues(&self) -> &[f64] {
        &self.revenues
    }

    pub fn revenue(&self, v: usize) -> f64 {
        self.revenues[v]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn hop_limit(&self) -> usize {
        self.hop_limit
    }

    /// Neighbours of `v` as `(neighbour, edge index)`, sorted by neighbour id.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// Index of the edge joining `a` and `b`, if any.
    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        let list = self.adjacency.get(a)?;
        list.binary_search_by_key(&b, |&(w, _)| w).ok().map(|pos| list[pos].1)
    }

    pub fn total_cost(&self) -> f64 {
        self.edges.iter().map(|e| e.cost).sum()
    }

    /// True when every cost, revenue and the budget are whole numbers.
    pub fn is_integral(&self) -> bool {
        let whole = |x: f64| x.fract() == 0.0;
        whole(self.budget) && self.edges.iter().all(|e| whole(e.cost)) && self.revenues.iter().all(|&r| whole(r))
    }

    pub fn with_name(&self, name: impl Into<String>) -> Result<Self, InstanceError> {
        self.rebuild(|b| b.name = name.into())
    }

    pub fn with_budget(&self, budget: f64) -> Result<Self, InstanceError> {
        self.rebuild(|b| b.budget = budget)
    }

    pub fn with_hop_limit(&self, hop_limit: usize) -> Result<Self, InstanceError> {
        self.rebuild(|b| b.hop_limit = hop_limit)
    }

    /// Same nodes and data, edge set replaced.
    pub fn with_edges(&self, edges: Vec<Edge>) -> Result<Self, InstanceError> {
        self.rebuild(|b| b.edges = edges)
    }

    fn rebuild(&self, change: impl FnOnce(&mut Parts)) -> Result<Self, InstanceError> {
        let mut parts = Parts {
            name: self.name.clone(),
            node_count: self.node_count,
            edges: self.edges.clone(),
            revenues: self.revenues.clone(),
            root: self.root,
            budget: self.budget,
            hop_limit: self.hop_limit,
        };
        change(&mut parts);
        Instance::new(parts.name, parts.node_count, parts.edges, parts.revenues, parts.root, parts.budget, parts.hop_limit)
    }
}

struct Parts {
    name: String,
    node_count: usize,
    edges: Vec<Edge>,
    revenues: Vec<f64>,
    root: usize,
    budget: f64,
    hop_limit: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("missing section {0}")]
    MissingSection(&'static str),
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("invalid instance: {0}")]
    InvariantViolation(#[from] InstanceError),
    #[error("no root node given")]
    MissingRoot,
    #[error("no budget given")]
    MissingBudget,
    #[error("no hop limit given")]
    MissingHopLimit,
}

/// A non-fatal observation made while reading an STP file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseWarning {
    pub line: usize,
    pub message: String,
}

/// Everything the tolerant STP reader collected before validation.
#[derive(Debug, Default)]
struct RawStp {
    name: Option<String>,
    saw_graph: bool,
    saw_terminals: bool,
    nodes: Option<(usize, usize)>,
    declared_edges: Option<(usize, usize)>,
    declared_terminals: Option<(usize, usize)>,
    edges: Vec<Edge>,
    terminals: BTreeMap<usize, f64>,
    terminal_order: Vec<usize>,
    root: Option<usize>,
    budget: Option<f64>,
    hop_limit: Option<usize>,
    warnings: Vec<ParseWarning>,
}

fn malformed(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::MalformedLine { line, message: message.into() }
}

fn parse_number<T: std::str::FromStr>(token: Option<&str>, line: usize, what: &str) -> Result<T, ParseError> {
    let token = token.ok_or_else(|| malformed(line, format!("expected {what}")))?;
    token.parse().map_err(|_| malformed(line, format!("cannot parse {what} from '{token}'")))
}

fn parse_real(token: Option<&str>, line: usize, what: &str) -> Result<f64, ParseError> {
    let value: f64 = parse_number(token, line, what)?;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(malformed(line, format!("{what} must be finite")))
    }
}

/// Converts a 1-based file id to a 0-based node id.
fn parse_node(token: Option<&str>, line: usize) -> Result<usize, ParseError> {
    let id: usize = parse_number(token, line, "node id")?;
    id.checked_sub(1).ok_or_else(|| malformed(line, "node ids start at 1"))
}

fn expect_end(tokens: &mut std::str::SplitWhitespace<'_>, line: usize) -> Result<(), ParseError> {
    match tokens.next() {
        None => Ok(()),
        Some(extra) => Err(malformed(line, format!("unexpected trailing token '{extra}'"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    TopLevel,
    Comment,
    Graph,
    Terminals,
    Budget,
    Hop,
    Unknown,
}

fn scan(text: &str) -> Result<RawStp, ParseError> {
    let mut raw = RawStp::default();
    let mut section = Section::TopLevel;

    for (idx, full_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = full_line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let keyword = tokens.next().unwrap_or_default().to_ascii_lowercase();

        if idx == 0 && trimmed.contains("STP File") {
            continue;
        }
        if keyword == "eof" {
            break;
        }
        if keyword == "section" {
            let name = tokens.next().unwrap_or_default().to_ascii_lowercase();
            section = match name.as_str() {
                "comment" => Section::Comment,
                "graph" => {
                    raw.saw_graph = true;
                    Section::Graph
                }
                "terminals" => {
                    raw.saw_terminals = true;
                    Section::Terminals
                }
                "budget" => Section::Budget,
                "hop" | "hops" | "hoplimit" => Section::Hop,
                _ => {
                    raw.warnings.push(ParseWarning { line: line_no, message: format!("ignoring unknown section '{name}'") });
                    Section::Unknown
                }
            };
            continue;
        }
        if keyword == "end" {
            section = Section::TopLevel;
            continue;
        }

        // Root, budget and hop lines are accepted in any section.
        match keyword.as_str() {
            "root" | "rootp" => {
                let r = parse_node(tokens.next(), line_no)?;
                expect_end(&mut tokens, line_no)?;
                if raw.root.replace(r).is_some() {
                    return Err(malformed(line_no, "root given twice"));
                }
                continue;
            }
            "budget" => {
                raw.budget = Some(parse_real(tokens.next(), line_no, "budget")?);
                expect_end(&mut tokens, line_no)?;
                continue;
            }
            "hoplimit" => {
                raw.hop_limit = Some(parse_number(tokens.next(), line_no, "hop limit")?);
                expect_end(&mut tokens, line_no)?;
                continue;
            }
            _ => {}
        }

        match (section, keyword.as_str()) {
            (Section::Comment, "name") => {
                let rest = trimmed[4..].trim();
                let name = rest.strip_prefix('"').and_then(|r| r.strip_suffix('"')).unwrap_or(rest);
                raw.name = Some(name.to_string());
            }
            (Section::Comment | Section::Unknown, _) => {}
            (Section::Graph, "nodes") => {
                raw.nodes = Some((parse_number(tokens.next(), line_no, "node count")?, line_no));
                expect_end(&mut tokens, line_no)?;
            }
            (Section::Graph, "edges") => {
                raw.declared_edges = Some((parse_number(tokens.next(), line_no, "edge count")?, line_no));
                expect_end(&mut tokens, line_no)?;
            }
            (Section::Graph, "e") => {
                let u = parse_node(tokens.next(), line_no)?;
                let v = parse_node(tokens.next(), line_no)?;
                let cost = parse_real(tokens.next(), line_no, "edge cost")?;
                expect_end(&mut tokens, line_no)?;
                raw.edges.push(Edge { u, v, cost });
            }
            (Section::Terminals, "terminals") => {
                raw.declared_terminals = Some((parse_number(tokens.next(), line_no, "terminal count")?, line_no));
                expect_end(&mut tokens, line_no)?;
            }
            (Section::Terminals, "t" | "tp" | "tr") => {
                let v = parse_node(tokens.next(), line_no)?;
                let revenue = match tokens.next() {
                    Some(tok) => parse_real(Some(tok), line_no, "revenue")?,
                    None => {
                        raw.warnings.push(ParseWarning { line: line_no, message: "terminal without revenue, using 0".into() });
                        0.0
                    }
                };
                expect_end(&mut tokens, line_no)?;
                if raw.terminals.insert(v, revenue).is_some() {
                    return Err(malformed(line_no, format!("terminal {} listed twice", v + 1)));
                }
                raw.terminal_order.push(v);
            }
            (Section::Budget, "b") => {
                raw.budget = Some(parse_real(tokens.next(), line_no, "budget")?);
                expect_end(&mut tokens, line_no)?;
            }
            (Section::Hop, "h") => {
                raw.hop_limit = Some(parse_number(tokens.next(), line_no, "hop limit")?);
                expect_end(&mut tokens, line_no)?;
            }
            (Section::TopLevel, _) => {
                raw.warnings.push(ParseWarning { line: line_no, message: format!("ignoring line outside any section: '{trimmed}'") });
            }
            (_, other) => {
                return Err(malformed(line_no, format!("unexpected keyword '{other}'")));
            }
        }
    }
    Ok(raw)
}

/// Graph data shared by the instance reader and the generator base reader.
fn graph_from_raw(raw: &mut RawStp) -> Result<usize, ParseError> {
    if !raw.saw_graph {
        return Err(ParseError::MissingSection("Graph"));
    }
    let (node_count, nodes_line) = raw.nodes.ok_or(malformed(0, "Graph section has no Nodes line"))?;
    if let Some((declared, line)) = raw.declared_edges {
        if declared != raw.edges.len() {
            return Err(malformed(line, format!("declared {declared} edges but found {}", raw.edges.len())));
        }
    }
    if node_count == 0 {
        return Err(malformed(nodes_line, "node count must be positive"));
    }
    Ok(node_count)
}

fn check_terminal_count(raw: &mut RawStp) {
    if let Some((declared, line)) = raw.declared_terminals {
        if declared != raw.terminals.len() {
            raw.warnings.push(ParseWarning {
                line,
                message: format!("declared {declared} terminals but found {}", raw.terminals.len()),
            });
        }
    }
}

/// Parses an STP file, returning the instance and any warnings.
pub fn parse_stp_with_warnings(text: &str) -> Result<(Instance, Vec<ParseWarning>), ParseError> {
    let mut raw = scan(text)?;
    let node_count = graph_from_raw(&mut raw)?;
    if !raw.saw_terminals {
        return Err(ParseError::MissingSection("Terminals"));
    }
    check_terminal_count(&mut raw);
    let root = raw.root.ok_or(ParseError::MissingRoot)?;
    let budget = raw.budget.ok_or(ParseError::MissingBudget)?;
    let hop_limit = raw.hop_limit.ok_or(ParseError::MissingHopLimit)?;

    let mut revenues = vec![0.0; node_count];
    for (&v, &revenue) in &raw.terminals {
        if v >= node_count {
            return Err(InstanceError::NodeOutOfRange { node: v, node_count }.into());
        }
        revenues[v] = revenue;
    }
    let instance = Instance::new(raw.name.take().unwrap_or_default(), node_count, raw.edges, revenues, root, budget, hop_limit)?;
    Ok((instance, raw.warnings))
}

pub fn parse_stp(text: &str) -> Result<Instance, ParseError> {
    parse_stp_with_warnings(text).map(|(instance, _)| instance)
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

/// Writes the canonical STP form. Only nodes with positive revenue are listed
/// as terminals.
pub fn write_stp(instance: &Instance) -> String {
    let mut out = String::new();
    let terminals: Vec<(usize, f64)> =
        instance.revenues.iter().enumerate().filter(|(_, &r)| r > 0.0).map(|(v, &r)| (v, r)).collect();

    let _ = writeln!(out, "{STP_HEADER}");
    let _ = writeln!(out);
    let _ = writeln!(out, "SECTION Comment");
    let _ = writeln!(out, "Name \"{}\"", instance.name);
    let _ = writeln!(out, "END");
    let _ = writeln!(out);
    let _ = writeln!(out, "SECTION Graph");
    let _ = writeln!(out, "Nodes {}", instance.node_count);
    let _ = writeln!(out, "Edges {}", instance.edges.len());
    for e in &instance.edges {
        let _ = writeln!(out, "E {} {} {}", e.u + 1, e.v + 1, fmt_num(e.cost));
    }
    let _ = writeln!(out, "END");
    let _ = writeln!(out);
    let _ = writeln!(out, "SECTION Terminals");
    let _ = writeln!(out, "Terminals {}", terminals.len());
    let _ = writeln!(out, "RootP {}", instance.root + 1);
    for (v, r) in terminals {
        let _ = writeln!(out, "TP {} {}", v + 1, fmt_num(r));
    }
    let _ = writeln!(out, "END");
    let _ = writeln!(out);
    let _ = writeln!(out, "SECTION Budget");
    let _ = writeln!(out, "B {}", fmt_num(instance.budget));
    let _ = writeln!(out, "END");
    let _ = writeln!(out);
    let _ = writeln!(out, "SECTION Hop");
    let _ = writeln!(out, "H {}", instance.hop_limit);
    let _ = writeln!(out, "END");
    let _ = writeln!(out);
    let _ = writeln!(out, "EOF");
    out
}

/// Plain Steiner tree data (graph, costs, terminal set) used as generator input,
/// as found in the OR-Library B and C classes.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseGraph {
    pub name: String,
    pub node_count: usize,
    pub edges: Vec<Edge>,
    /// Terminal ids in file order; the first one becomes the root.
    pub terminals: Vec<usize>,
}

impl BaseGraph {
    /// Reads an STP file for its graph and terminal list. Budget, hop and root
    /// data, if present, are ignored.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut raw = scan(text)?;
        let node_count = graph_from_raw(&mut raw)?;
        if !raw.saw_terminals {
            return Err(ParseError::MissingSection("Terminals"));
        }
        let terminals = raw.terminal_order.clone();
        for &t in &terminals {
            if t >= node_count {
                return Err(InstanceError::NodeOutOfRange { node: t, node_count }.into());
            }
        }
        // validate graph invariants through the instance constructor
        Instance::new("", node_count, raw.edges.clone(), vec![0.0; node_count], 0, 0.0, 1)?;
        Ok(BaseGraph { name: raw.name.unwrap_or_default(), node_count, edges: raw.edges, terminals })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("base graph has no terminals")]
    EmptyTerminalSet,
    #[error("budget divisor must be 5 or 10, got {0}")]
    BadDivisor(u32),
    #[error("revenue cap must be at least 1")]
    BadRevenueCap,
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// How the generated instance is named.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NameStyle {
    /// `<base>-<R>-<H>`, used for the B class.
    RevenueHop,
    /// `<base>-<R>-<b>-<H>`, used for the C class.
    RevenueDivisorHop,
}

#[derive(Debug, Clone)]
pub struct GeneratorParams {
    pub base: BaseGraph,
    pub revenue_cap: u32,
    pub budget_divisor: u32,
    pub hop_limit: usize,
    pub rng_seed: u64,
    pub name_style: NameStyle,
}

/// Builds an instance in the style of the DIMACS STPRBH set: terminals get a
/// uniform integer revenue in `[1, R]`, other nodes 0, the root is the first
/// terminal and the budget is the total edge cost divided by `b`.
pub fn generate_instance(params: &GeneratorParams) -> Result<Instance, GeneratorError> {
    if params.base.terminals.is_empty() {
        return Err(GeneratorError::EmptyTerminalSet);
    }
    if params.budget_divisor != 5 && params.budget_divisor != 10 {
        return Err(GeneratorError::BadDivisor(params.budget_divisor));
    }
    if params.revenue_cap == 0 {
        return Err(GeneratorError::BadRevenueCap);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut revenues = vec![0.0; params.base.node_count];
    for &t in &params.base.terminals {
        if t < revenues.len() {
            revenues[t] = f64::from(rng.gen_range(1..=params.revenue_cap));
        }
    }
    let total: f64 = params.base.edges.iter().map(|e| e.cost).sum();
    let budget = total / f64::from(params.budget_divisor);
    let name = match params.name_style {
        NameStyle::RevenueHop => format!("{}-{}-{}", params.base.name, params.revenue_cap, params.hop_limit),
        NameStyle::RevenueDivisorHop => {
            format!("{}-{}-{}-{}", params.base.name, params.revenue_cap, params.budget_divisor, params.hop_limit)
        }
    };
    Ok(Instance::new(
        name,
        params.base.node_count,
        params.base.edges.clone(),
        revenues,
        params.base.terminals[0],
        budget,
        params.hop_limit,
    )?)
}
