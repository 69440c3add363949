//! Skeleton schemas: joint tree, body-center joints and the curated angle table.
//!
//! Schemas are plain data loaded from `key = value` documents (see
//! `schemas/kinect25.schema` for the bundled layout and the README for the
//! grammar).

use std::collections::{BTreeSet, VecDeque};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kv::KvDoc;

const KINECT25: &str = include_str!("../schemas/kinect25.schema");

/// Named endpoint pairs used by pair-based angles, in this order.
pub const ENDPOINT_PAIR_NAMES: [&str; 4] = ["hands", "elbows", "knees", "feet"];
/// Hand names used by finger-based angles, in this order.
pub const FINGER_NAMES: [&str; 2] = ["left", "right"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AngleKind {
    Local,
    CenterUnfixed,
    CenterFixed,
    Pair,
    Finger,
}

impl AngleKind {
    fn keyword(self) -> &'static str {
        match self {
            AngleKind::Local => "local",
            AngleKind::CenterUnfixed => "center_unfixed",
            AngleKind::CenterFixed => "center_fixed",
            AngleKind::Pair => "pair",
            AngleKind::Finger => "finger",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Vertex {
    /// The joint the feature is written to.
    Target,
    Fixed(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Endpoints {
    Fixed(usize, usize),
    /// Per-joint neighbour pair; `None` where the joint has no usable pair.
    Adjacent(Vec<Option<(usize, usize)>>),
    /// The topology's (neck, pelvis) pair.
    Center,
    /// A fixed anchor joint and the target joint itself.
    AnchorAndTarget(usize),
}

/// One angular channel: how to pick the vertex and the two endpoints for each
/// target joint, and which joints are defined as zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AngleDef {
    pub name: String,
    pub kind: AngleKind,
    pub vertex: Vertex,
    pub endpoints: Endpoints,
    pub zero_joints: BTreeSet<usize>,
}

impl AngleDef {
    /// `(vertex, w1, w2)` for `target`, or `None` if the feature is pinned to zero.
    pub fn resolve(&self, target: usize, center: (usize, usize)) -> Option<(usize, usize, usize)> {
        if self.zero_joints.contains(&target) {
            return None;
        }
        let u = match self.vertex {
            Vertex::Target => target,
            Vertex::Fixed(j) => j,
        };
        let (w1, w2) = match &self.endpoints {
            Endpoints::Fixed(a, b) => (*a, *b),
            Endpoints::Adjacent(table) => table.get(target).copied().flatten()?,
            Endpoints::Center => center,
            Endpoints::AnchorAndTarget(a) => (*a, target),
        };
        Some((u, w1, w2))
    }

    fn map_joints(&self, perm: &[usize]) -> AngleDef {
        let endpoints = match &self.endpoints {
            Endpoints::Fixed(a, b) => Endpoints::Fixed(perm[*a], perm[*b]),
            Endpoints::Adjacent(table) => {
                let mut out = vec![None; table.len()];
                for (j, p) in table.iter().enumerate() {
                    out[perm[j]] = p.map(|(a, b)| (perm[a], perm[b]));
                }
                Endpoints::Adjacent(out)
            }
            Endpoints::Center => Endpoints::Center,
            Endpoints::AnchorAndTarget(a) => Endpoints::AnchorAndTarget(perm[*a]),
        };
        AngleDef {
            name: self.name.clone(),
            kind: self.kind,
            vertex: match self.vertex {
                Vertex::Target => Vertex::Target,
                Vertex::Fixed(j) => Vertex::Fixed(perm[j]),
            },
            endpoints,
            zero_joints: self.zero_joints.iter().map(|&j| perm[j]).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkeletonTopology {
    pub name: String,
    num_joints: usize,
    edges: Vec<(usize, usize)>,
    /// (neck, pelvis)
    center_pair: (usize, usize),
    bone_parent: Vec<Option<usize>>,
    angle_table: Vec<AngleDef>,
    /// hands, elbows, knees, feet
    endpoint_pairs: [(usize, usize); 4],
    /// (hand tip, thumb) for the left and right hand
    finger_pairs: Option<[(usize, usize); 2]>,
}

impl SkeletonTopology {
    /// The bundled 25-joint Kinect v2 schema.
    pub fn kinect25() -> Self {
        Self::from_schema_str(KINECT25).expect("bundled kinect25 schema is valid")
    }

    pub fn kinect25_schema_text() -> &'static str {
        KINECT25
    }

    pub fn from_schema_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_schema_str(&fs::read_to_string(path)?)
    }

    pub fn from_schema_str(text: &str) -> Result<Self> {
        let doc = KvDoc::parse(text)?;
        let need = |key: &str| doc.get(key).ok_or_else(|| Error::Topology(format!("schema is missing `{key}`")));
        let name = doc.value("name").unwrap_or("unnamed").to_string();
        let num_joints: usize =
            doc.parse_value("num_joints")?.ok_or_else(|| Error::Topology("schema is missing `num_joints`".into()))?;

        let edges_entry = need("edges")?;
        let edges = edges_entry
            .value
            .split_whitespace()
            .map(|tok| parse_dash_pair(tok, edges_entry.line))
            .collect::<Result<Vec<_>>>()?;

        let cp = need("center_pair")?;
        let center_pair = parse_space_pair(&cp.value, cp.line)?;

        let bp = need("bone_parent")?;
        let bone_parent = bp
            .value
            .split_whitespace()
            .map(|tok| match tok {
                "-" => Ok(None),
                _ => parse_index(tok, bp.line).map(Some),
            })
            .collect::<Result<Vec<_>>>()?;

        let mut endpoint_pairs = [(0, 0); 4];
        for (slot, key) in endpoint_pairs.iter_mut().zip(ENDPOINT_PAIR_NAMES) {
            let e = need(&format!("endpoints.{key}"))?;
            *slot = parse_space_pair(&e.value, e.line)?;
        }

        let finger_entries: Vec<_> = FINGER_NAMES.iter().map(|k| doc.get(&format!("fingers.{k}"))).collect();
        let finger_pairs = match (finger_entries[0], finger_entries[1]) {
            (None, None) => None,
            (Some(l), Some(r)) => Some([parse_space_pair(&l.value, l.line)?, parse_space_pair(&r.value, r.line)?]),
            _ => return Err(Error::Topology("finger pairs must list both hands or neither".into())),
        };

        let mut local = vec![None; num_joints];
        for (key, e) in doc.section("local") {
            let j = parse_index(key, e.line)?;
            if j >= num_joints {
                return Err(Error::parse(e.line, format!("local-angle joint {j} >= {num_joints}")));
            }
            local[j] = Some(parse_space_pair(&e.value, e.line)?);
        }

        let mut angle_table = Vec::new();
        for (angle_name, e) in doc.section("angles") {
            let mut toks = e.value.split_whitespace();
            let kind = toks.next().unwrap_or("");
            let arg = toks.next();
            if toks.next().is_some() {
                return Err(Error::parse(e.line, "too many tokens in angle definition"));
            }
            let def = match (kind, arg) {
                ("local", None) => {
                    let zero = (0..num_joints).filter(|&j| local[j].is_none()).collect();
                    AngleDef {
                        name: angle_name.into(),
                        kind: AngleKind::Local,
                        vertex: Vertex::Target,
                        endpoints: Endpoints::Adjacent(local.clone()),
                        zero_joints: zero,
                    }
                }
                ("center_unfixed", None) => AngleDef {
                    name: angle_name.into(),
                    kind: AngleKind::CenterUnfixed,
                    vertex: Vertex::Target,
                    endpoints: Endpoints::Center,
                    zero_joints: [center_pair.0, center_pair.1].into(),
                },
                ("center_fixed", None) => AngleDef {
                    name: angle_name.into(),
                    kind: AngleKind::CenterFixed,
                    vertex: Vertex::Fixed(center_pair.1),
                    endpoints: Endpoints::AnchorAndTarget(center_pair.0),
                    zero_joints: [center_pair.0, center_pair.1].into(),
                },
                ("pair", Some(which)) => {
                    let i = ENDPOINT_PAIR_NAMES
                        .iter()
                        .position(|n| *n == which)
                        .ok_or_else(|| Error::parse(e.line, format!("unknown endpoint pair `{which}`")))?;
                    let (a, b) = endpoint_pairs[i];
                    AngleDef {
                        name: angle_name.into(),
                        kind: AngleKind::Pair,
                        vertex: Vertex::Target,
                        endpoints: Endpoints::Fixed(a, b),
                        zero_joints: [a, b].into(),
                    }
                }
                ("finger", Some(which)) => {
                    let fp =
                        finger_pairs.ok_or_else(|| Error::parse(e.line, "finger angle without [fingers] section"))?;
                    let i = FINGER_NAMES
                        .iter()
                        .position(|n| *n == which)
                        .ok_or_else(|| Error::parse(e.line, format!("unknown hand `{which}`")))?;
                    let (a, b) = fp[i];
                    AngleDef {
                        name: angle_name.into(),
                        kind: AngleKind::Finger,
                        vertex: Vertex::Target,
                        endpoints: Endpoints::Fixed(a, b),
                        zero_joints: [a, b].into(),
                    }
                }
                _ => return Err(Error::parse(e.line, format!("bad angle definition `{}`", e.value))),
            };
            angle_table.push(def);
        }

        let topo = SkeletonTopology {
            name,
            num_joints,
            edges,
            center_pair,
            bone_parent,
            angle_table,
            endpoint_pairs,
            finger_pairs,
        };
        topo.validate()?;
        Ok(topo)
    }

    /// Renders the topology in the schema file grammar.
    pub fn to_schema_string(&self) -> String {
        let mut doc = KvDoc::new();
        doc.set("name", &self.name);
        doc.set("num_joints", self.num_joints.to_string());
        doc.set("edges", join(self.edges.iter().map(|(a, b)| format!("{a}-{b}"))));
        doc.set("center_pair", format!("{} {}", self.center_pair.0, self.center_pair.1));
        doc.set("bone_parent", join(self.bone_parent.iter().map(|p| p.map_or("-".to_string(), |p| p.to_string()))));
        for (name, (a, b)) in ENDPOINT_PAIR_NAMES.iter().zip(self.endpoint_pairs) {
            doc.set(format!("endpoints.{name}"), format!("{a} {b}"));
        }
        if let Some(fp) = self.finger_pairs {
            for (name, (a, b)) in FINGER_NAMES.iter().zip(fp) {
                doc.set(format!("fingers.{name}"), format!("{a} {b}"));
            }
        }
        if let Some(Endpoints::Adjacent(table)) =
            self.angle_table.iter().find(|d| d.kind == AngleKind::Local).map(|d| &d.endpoints)
        {
            for (j, p) in table.iter().enumerate() {
                if let Some((a, b)) = p {
                    doc.set(format!("local.{j}"), format!("{a} {b}"));
                }
            }
        }
        for def in &self.angle_table {
            let arg = match (def.kind, &def.endpoints) {
                (AngleKind::Pair, Endpoints::Fixed(a, b)) => self
                    .endpoint_pairs
                    .iter()
                    .position(|p| *p == (*a, *b))
                    .map(|i| format!(" {}", ENDPOINT_PAIR_NAMES[i])),
                (AngleKind::Finger, Endpoints::Fixed(a, b)) => self
                    .finger_pairs
                    .and_then(|fp| fp.iter().position(|p| *p == (*a, *b)))
                    .map(|i| format!(" {}", FINGER_NAMES[i])),
                _ => None,
            };
            doc.set(format!("angles.{}", def.name), format!("{}{}", def.kind.keyword(), arg.unwrap_or_default()));
        }
        doc.render()
    }

    fn validate(&self) -> Result<()> {
        let v = self.num_joints;
        let bad = |msg: String| Err(Error::Topology(msg));
        if v == 0 {
            return bad("num_joints must be at least 1".into());
        }
        for &(a, b) in &self.edges {
            if a >= v || b >= v {
                return bad(format!("edge {a}-{b} references a joint >= {v}"));
            }
            if a == b {
                return bad(format!("self edge {a}-{b}"));
            }
        }
        if self.edges.len() != v - 1 {
            return bad(format!("a tree over {v} joints needs {} edges, found {}", v - 1, self.edges.len()));
        }
        if self.distances_from(0).iter().any(Option::is_none) {
            return bad("edges do not connect every joint".into());
        }
        let (neck, pelvis) = self.center_pair;
        if neck >= v || pelvis >= v {
            return bad(format!("center pair ({neck}, {pelvis}) out of range"));
        }
        if self.bone_parent.len() != v {
            return bad(format!("bone_parent has {} entries for {v} joints", self.bone_parent.len()));
        }
        let roots = self.bone_parent.iter().filter(|p| p.is_none()).count();
        if roots != 1 {
            return bad(format!("bone_parent must have exactly one root, found {roots}"));
        }
        for (j, p) in self.bone_parent.iter().enumerate() {
            if let Some(p) = *p {
                if p >= v || !self.is_edge(j, p) {
                    return bad(format!("bone parent of joint {j} ({p}) is not a neighbour"));
                }
            }
        }
        for start in 0..v {
            let mut cur = start;
            for _ in 0..=v {
                match self.bone_parent[cur] {
                    Some(p) => cur = p,
                    None => break,
                }
            }
            if self.bone_parent[cur].is_some() {
                return bad(format!("bone_parent chain from joint {start} does not reach the root"));
            }
        }
        let pairs = self.endpoint_pairs.iter().chain(self.finger_pairs.iter().flatten());
        for &(a, b) in pairs {
            if a >= v || b >= v {
                return bad(format!("endpoint pair ({a}, {b}) out of range"));
            }
        }
        let want = if self.finger_pairs.is_some() { 9 } else { 7 };
        if self.angle_table.len() != want {
            return bad(format!("angle table must have {want} entries, found {}", self.angle_table.len()));
        }
        for def in &self.angle_table {
            if let Endpoints::Adjacent(table) = &def.endpoints {
                for (j, p) in table.iter().enumerate() {
                    if let Some((a, b)) = *p {
                        if a == b || !self.is_edge(j, a) || !self.is_edge(j, b) {
                            return bad(format!("local pair ({a}, {b}) for joint {j} is not two distinct neighbours"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn num_joints(&self) -> usize {
        self.num_joints
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn center_pair(&self) -> (usize, usize) {
        self.center_pair
    }

    pub fn neck(&self) -> usize {
        self.center_pair.0
    }

    pub fn pelvis(&self) -> usize {
        self.center_pair.1
    }

    pub fn bone_parent(&self) -> &[Option<usize>] {
        &self.bone_parent
    }

    pub fn root(&self) -> usize {
        self.bone_parent.iter().position(Option::is_none).expect("validated root")
    }

    pub fn angle_table(&self) -> &[AngleDef] {
        &self.angle_table
    }

    pub fn endpoint_pairs(&self) -> [(usize, usize); 4] {
        self.endpoint_pairs
    }

    pub fn finger_pairs(&self) -> Option<[(usize, usize); 2]> {
        self.finger_pairs
    }

    pub fn is_edge(&self, a: usize, b: usize) -> bool {
        self.edges.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a))
    }

    pub fn neighbors(&self, j: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| match () {
                _ if a == j => Some(b),
                _ if b == j => Some(a),
                _ => None,
            })
            .collect()
    }

    /// Hop distances from `start`; `None` for unreachable joints.
    pub fn distances_from(&self, start: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.num_joints];
        let mut queue = VecDeque::from([start]);
        dist[start] = Some(0);
        while let Some(j) = queue.pop_front() {
            let d = dist[j].unwrap();
            for n in self.neighbors(j) {
                if dist[n].is_none() {
                    dist[n] = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    /// Longest shortest path between any two joints.
    pub fn diameter(&self) -> usize {
        (0..self.num_joints).flat_map(|s| self.distances_from(s)).flatten().max().unwrap_or(0)
    }

    /// Renames joints so that old joint `j` becomes `perm[j]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<SkeletonTopology> {
        let v = self.num_joints;
        let mut seen = vec![false; v];
        if perm.len() != v || perm.iter().any(|&p| p >= v || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Topology("relabel needs a permutation of the joint indices".into()));
        }
        let mut bone_parent = vec![None; v];
        for (j, p) in self.bone_parent.iter().enumerate() {
            bone_parent[perm[j]] = p.map(|p| perm[p]);
        }
        let map_pair = |(a, b): (usize, usize)| (perm[a], perm[b]);
        let topo = SkeletonTopology {
            name: self.name.clone(),
            num_joints: v,
            edges: self.edges.iter().copied().map(map_pair).collect(),
            center_pair: map_pair(self.center_pair),
            bone_parent,
            angle_table: self.angle_table.iter().map(|d| d.map_joints(perm)).collect(),
            endpoint_pairs: self.endpoint_pairs.map(map_pair),
            finger_pairs: self.finger_pairs.map(|fp| fp.map(map_pair)),
        };
        topo.validate()?;
        Ok(topo)
    }

    /// A topology with a different set of edges, used for synthetic graphs in tests.
    /// The angle table is left empty-safe: only graph operators should be built from it.
    pub fn bare_tree(num_joints: usize, edges: Vec<(usize, usize)>) -> Result<SkeletonTopology> {
        let probe = SkeletonTopology {
            name: "bare".into(),
            num_joints,
            edges,
            center_pair: (0, 0),
            bone_parent: vec![None; num_joints],
            angle_table: Vec::new(),
            endpoint_pairs: [(0, 0); 4],
            finger_pairs: None,
        };
        let dist = probe.distances_from(0);
        if probe.edges.len() + 1 != num_joints || dist.iter().any(Option::is_none) {
            return Err(Error::Topology("bare tree edges must connect every joint".into()));
        }
        let mut bone_parent = vec![None; num_joints];
        for (j, slot) in bone_parent.iter_mut().enumerate().skip(1) {
            let dj = dist[j].unwrap();
            *slot = probe.neighbors(j).into_iter().find(|&n| dist[n] == Some(dj - 1));
        }
        Ok(SkeletonTopology { bone_parent, ..probe })
    }
}

fn join(items: impl Iterator<Item = String>) -> String {
    items.collect::<Vec<_>>().join(" ")
}

fn parse_index(tok: &str, line: usize) -> Result<usize> {
    tok.parse().map_err(|_| Error::parse(line, format!("expected a joint index, got `{tok}`")))
}

fn parse_dash_pair(tok: &str, line: usize) -> Result<(usize, usize)> {
    let (a, b) = tok.split_once('-').ok_or_else(|| Error::parse(line, format!("expected `a-b`, got `{tok}`")))?;
    Ok((parse_index(a, line)?, parse_index(b, line)?))
}

fn parse_space_pair(value: &str, line: usize) -> Result<(usize, usize)> {
    let toks: Vec<_> = value.split_whitespace().collect();
    match toks[..] {
        [a, b] => Ok((parse_index(a, line)?, parse_index(b, line)?)),
        _ => Err(Error::parse(line, format!("expected two joint indices, got `{value}`"))),
    }
}
