//! Triangle meshes: file ingestion, parametric T-joint generation, uniform
//! refinement and per-element geometry.
//!
//! A mesh is a conforming triangulation of a simply connected polygon with
//! counterclockwise elements. Its boundary is a single closed loop of labeled
//! edges, partitioned into *flux walls* (`w1..wL`, where the normal flux
//! vanishes and the potential is constant) and *flux gates* (`g1..gG`, which
//! carry a prescribed total flux).
//!
//! File format (UTF-8, `#` starts a comment line):
//!
//! ```text
//! mesh2d <n_nodes> <n_triangles> <n_boundary_edges>
//! x y            one line per node, meters
//! i j k region   one line per triangle, 0-based node indices, CCW
//! i j label      one line per boundary edge, label w<k> or g<k>
//! ```

use std::collections::BTreeMap;
use std::fmt;

use crate::vec2::Vec2;

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("triangle {triangle} has non-positive signed area {area:.3e} (nodes must be counterclockwise)")]
    Orientation { triangle: usize, area: f64 },
    #[error("boundary edge {edge} ({a}-{b}): {reason}")]
    BadBoundaryEdge { edge: usize, a: usize, b: usize, reason: String },
    #[error("mesh boundary is not a single closed loop of the labeled edges: {0}")]
    OpenBoundary(String),
    #[error("boundary labels must be contiguous: {0}")]
    LabelGap(String),
    #[error("node {node} is shared by walls w{a} and w{b}; walls may not touch")]
    TouchingWalls { node: usize, a: usize, b: usize },
    #[error("triangle index {index} out of range ({len} triangles)")]
    TriangleIndex { index: usize, len: usize },
    #[error("infeasible T-joint dimensions: {0}")]
    InfeasibleDimensions(String),
}

/// Label of one boundary edge. Indices are 0-based internally; the file
/// format and `Display` use the 1-based `w<k>` / `g<k>` names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum BoundaryLabel {
    Wall(usize),
    Gate(usize),
}

impl fmt::Display for BoundaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryLabel::Wall(k) => write!(f, "w{}", k + 1),
            BoundaryLabel::Gate(k) => write!(f, "g{}", k + 1),
        }
    }
}

/// Area and P1 shape-function gradients of one triangle.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    /// Triangle area in m^2.
    pub area: f64,
    /// Gradients of the three barycentric shape functions, 1/m.
    pub basis_gradients: [Vec2; 3],
}

/// A maximal run of equally-labeled edges along the boundary loop.
#[derive(Clone, Debug)]
pub struct BoundaryRun {
    pub label: BoundaryLabel,
    /// Edge indices in CCW traversal order.
    pub edges: Vec<usize>,
    pub start_node: usize,
    pub end_node: usize,
}

/// The boundary loop grouped into labeled runs, in CCW order.
#[derive(Clone, Debug)]
pub struct BoundaryTopology {
    pub runs: Vec<BoundaryRun>,
    pub n_walls: usize,
    pub n_gates: usize,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    nodes: Vec<Vec2>,
    tris: Vec<[usize; 3]>,
    regions: Vec<i32>,
    /// Boundary edges oriented along the CCW boundary traversal.
    bedges: Vec<([usize; 2], BoundaryLabel)>,
    /// Triangle owning each boundary edge.
    bedge_tri: Vec<usize>,
    /// Boundary edge indices in CCW cyclic order.
    loop_edges: Vec<usize>,
    n_walls: usize,
    n_gates: usize,
}

fn signed_area(p0: Vec2, p1: Vec2, p2: Vec2) -> f64 {
    0.5 * (p1 - p0).cross(p2 - p0)
}

fn rot_pos90(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

impl Mesh {
    /// Build and validate a mesh from raw arrays.
    pub fn new(
        nodes: Vec<Vec2>,
        tris: Vec<[usize; 3]>,
        regions: Vec<i32>,
        bedges: Vec<([usize; 2], BoundaryLabel)>,
    ) -> Result<Self, MeshError> {
        let mut mesh = Mesh {
            nodes,
            tris,
            regions,
            bedges,
            bedge_tri: Vec::new(),
            loop_edges: Vec::new(),
            n_walls: 0,
            n_gates: 0,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.tris
    }

    pub fn regions(&self) -> &[i32] {
        &self.regions
    }

    pub fn boundary_edges(&self) -> &[([usize; 2], BoundaryLabel)] {
        &self.bedges
    }

    /// Triangle owning each boundary edge (parallel to `boundary_edges`).
    pub fn boundary_edge_triangles(&self) -> &[usize] {
        &self.bedge_tri
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.tris.len()
    }

    pub fn n_walls(&self) -> usize {
        self.n_walls
    }

    pub fn n_gates(&self) -> usize {
        self.n_gates
    }

    /// Area and P1 basis gradients of triangle `t`.
    pub fn element_geometry(&self, t: usize) -> Result<ElementGeometry, MeshError> {
        if t >= self.tris.len() {
            return Err(MeshError::TriangleIndex { index: t, len: self.tris.len() });
        }
        let [i, j, k] = self.tris[t];
        let (p0, p1, p2) = (self.nodes[i], self.nodes[j], self.nodes[k]);
        let area = signed_area(p0, p1, p2);
        let inv = 1.0 / (2.0 * area);
        Ok(ElementGeometry {
            area,
            basis_gradients: [
                rot_pos90(p2 - p1).scale(inv),
                rot_pos90(p0 - p2).scale(inv),
                rot_pos90(p1 - p0).scale(inv),
            ],
        })
    }

    pub fn total_area(&self) -> f64 {
        self.tris
            .iter()
            .map(|&[i, j, k]| signed_area(self.nodes[i], self.nodes[j], self.nodes[k]))
            .sum()
    }

    /// Shoelace area of the boundary loop (positive for the validated CCW loop).
    pub fn boundary_polygon_area(&self) -> f64 {
        let mut acc = 0.0;
        for &e in &self.loop_edges {
            let [a, b] = self.bedges[e].0;
            acc += self.nodes[a].cross(self.nodes[b]);
        }
        0.5 * acc
    }

    /// Boundary loop nodes in CCW order.
    pub fn boundary_loop_nodes(&self) -> Vec<usize> {
        self.loop_edges.iter().map(|&e| self.bedges[e].0[0]).collect()
    }

    /// Group the boundary loop into labeled runs (CCW, starting at a label change).
    pub fn boundary_topology(&self) -> BoundaryTopology {
        let n = self.loop_edges.len();
        // rotate so position 0 starts a fresh run
        let mut start = 0;
        for s in 0..n {
            let prev = self.bedges[self.loop_edges[(s + n - 1) % n]].1;
            let cur = self.bedges[self.loop_edges[s]].1;
            if prev != cur {
                start = s;
                break;
            }
        }
        let mut runs: Vec<BoundaryRun> = Vec::new();
        for p in 0..n {
            let e = self.loop_edges[(start + p) % n];
            let (verts, label) = self.bedges[e];
            match runs.last_mut() {
                Some(run) if run.label == label => {
                    run.edges.push(e);
                    run.end_node = verts[1];
                }
                _ => runs.push(BoundaryRun {
                    label,
                    edges: vec![e],
                    start_node: verts[0],
                    end_node: verts[1],
                }),
            }
        }
        BoundaryTopology { runs, n_walls: self.n_walls, n_gates: self.n_gates }
    }

    /// Wall index per node. Corner nodes shared by a wall and a gate belong to
    /// the wall, so every gate endpoint carries the adjacent wall's constant.
    pub fn wall_of_nodes(&self) -> Result<Vec<Option<usize>>, MeshError> {
        let mut wall = vec![None; self.nodes.len()];
        for &(verts, label) in &self.bedges {
            if let BoundaryLabel::Wall(w) = label {
                for &v in &verts {
                    match wall[v] {
                        None => wall[v] = Some(w),
                        Some(prev) if prev == w => {}
                        Some(prev) => {
                            return Err(MeshError::TouchingWalls { node: v, a: prev + 1, b: w + 1 })
                        }
                    }
                }
            }
        }
        Ok(wall)
    }

    /// Serialize to the plain-text mesh format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "mesh2d {} {} {}\n",
            self.nodes.len(),
            self.tris.len(),
            self.bedges.len()
        ));
        out.push_str("# nodes: x y\n");
        for p in &self.nodes {
            out.push_str(&format!("{} {}\n", p.x, p.y));
        }
        out.push_str("# triangles: i j k region\n");
        for (t, &[i, j, k]) in self.tris.iter().enumerate() {
            out.push_str(&format!("{} {} {} {}\n", i, j, k, self.regions[t]));
        }
        out.push_str("# boundary edges: i j label\n");
        for &([a, b], label) in &self.bedges {
            out.push_str(&format!("{} {} {}\n", a, b, label));
        }
        out
    }

    /// Parse the plain-text mesh format.
    pub fn parse(text: &str) -> Result<Self, MeshError> {
        let err = |line: usize, msg: &str| MeshError::Parse { line, msg: msg.to_string() };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (hline, header) = lines.next().ok_or_else(|| err(0, "empty file"))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("mesh2d") {
            return Err(err(hline, "expected header `mesh2d <n_nodes> <n_triangles> <n_boundary_edges>`"));
        }
        let mut counts = [0usize; 3];
        for c in counts.iter_mut() {
            let f = fields.next().ok_or_else(|| err(hline, "header needs three counts"))?;
            *c = f
                .parse::<usize>()
                .map_err(|_| err(hline, &format!("bad count `{f}`")))?;
        }
        if fields.next().is_some() {
            return Err(err(hline, "trailing fields in header"));
        }
        let [n_nodes, n_tris, n_bedges] = counts;
        // A node line needs at least "0 0": 4 bytes. Reject absurd headers early
        // instead of attempting huge allocations.
        let budget = text.len() / 2 + 64;
        if n_nodes > budget || n_tris > budget || n_bedges > budget {
            return Err(err(hline, "header counts exceed file size"));
        }
        if n_nodes < 3 || n_tris < 1 || n_bedges < 3 {
            return Err(err(hline, "a mesh needs at least 3 nodes, 1 triangle and 3 boundary edges"));
        }

        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let (ln, l) = lines.next().ok_or_else(|| err(usize::MAX, "unexpected end of file in node section"))?;
            let mut f = l.split_whitespace();
            let mut coord = [0.0f64; 2];
            for c in coord.iter_mut() {
                let tok = f.next().ok_or_else(|| err(ln, "node line needs `x y`"))?;
                *c = tok.parse::<f64>().map_err(|_| err(ln, &format!("bad coordinate `{tok}`")))?;
                if !c.is_finite() {
                    return Err(err(ln, "non-finite coordinate"));
                }
            }
            if f.next().is_some() {
                return Err(err(ln, "trailing fields in node line"));
            }
            nodes.push(Vec2::new(coord[0], coord[1]));
        }

        let mut tris = Vec::with_capacity(n_tris);
        let mut regions = Vec::with_capacity(n_tris);
        for _ in 0..n_tris {
            let (ln, l) = lines.next().ok_or_else(|| err(usize::MAX, "unexpected end of file in triangle section"))?;
            let mut f = l.split_whitespace();
            let mut idx = [0usize; 3];
            for v in idx.iter_mut() {
                let tok = f.next().ok_or_else(|| err(ln, "triangle line needs `i j k region`"))?;
                *v = tok.parse::<usize>().map_err(|_| err(ln, &format!("bad node index `{tok}`")))?;
                if *v >= n_nodes {
                    return Err(err(ln, &format!("node index {v} out of range (have {n_nodes} nodes)")));
                }
            }
            let tok = f.next().ok_or_else(|| err(ln, "triangle line needs a region tag"))?;
            let region = tok.parse::<i32>().map_err(|_| err(ln, &format!("bad region tag `{tok}`")))?;
            if f.next().is_some() {
                return Err(err(ln, "trailing fields in triangle line"));
            }
            tris.push(idx);
            regions.push(region);
        }

        let mut bedges = Vec::with_capacity(n_bedges);
        for _ in 0..n_bedges {
            let (ln, l) = lines.next().ok_or_else(|| err(usize::MAX, "unexpected end of file in boundary section"))?;
            let mut f = l.split_whitespace();
            let mut idx = [0usize; 2];
            for v in idx.iter_mut() {
                let tok = f.next().ok_or_else(|| err(ln, "boundary line needs `i j label`"))?;
                *v = tok.parse::<usize>().map_err(|_| err(ln, &format!("bad node index `{tok}`")))?;
                if *v >= n_nodes {
                    return Err(err(ln, &format!("node index {v} out of range (have {n_nodes} nodes)")));
                }
            }
            let tok = f.next().ok_or_else(|| err(ln, "boundary line needs a label `w<k>` or `g<k>`"))?;
            let label = parse_label(tok).ok_or_else(|| err(ln, &format!("bad boundary label `{tok}`")))?;
            if f.next().is_some() {
                return Err(err(ln, "trailing fields in boundary line"));
            }
            bedges.push((idx, label));
        }

        if let Some((ln, _)) = lines.next() {
            return Err(err(ln, "trailing content after the boundary section"));
        }

        Mesh::new(nodes, tris, regions, bedges)
    }

    fn validate(&mut self) -> Result<(), MeshError> {
        // orientation
        for (t, &[i, j, k]) in self.tris.iter().enumerate() {
            let area = signed_area(self.nodes[i], self.nodes[j], self.nodes[k]);
            if !(area > 0.0) || !area.is_finite() {
                return Err(MeshError::Orientation { triangle: t, area });
            }
        }

        // undirected edge -> incident triangles
        let mut incidence: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (t, &[i, j, k]) in self.tris.iter().enumerate() {
            for (a, b) in [(i, j), (j, k), (k, i)] {
                let key = (a.min(b), a.max(b));
                incidence.entry(key).or_default().push(t);
            }
        }
        for (&(a, b), ts) in &incidence {
            if ts.len() > 2 {
                return Err(MeshError::OpenBoundary(format!(
                    "edge {a}-{b} belongs to {} triangles",
                    ts.len()
                )));
            }
        }
        let n_topological: usize = incidence.values().filter(|ts| ts.len() == 1).count();
        if n_topological != self.bedges.len() {
            return Err(MeshError::OpenBoundary(format!(
                "{} labeled boundary edges but the triangulation has {} boundary edges",
                self.bedges.len(),
                n_topological
            )));
        }

        // each labeled edge must be a boundary edge of exactly one triangle;
        // orient it along its triangle's CCW cycle
        let mut seen: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        self.bedge_tri = vec![0; self.bedges.len()];
        for (e, (verts, _)) in self.bedges.iter_mut().enumerate() {
            let [a, b] = *verts;
            if a == b {
                return Err(MeshError::BadBoundaryEdge { edge: e, a, b, reason: "degenerate edge".into() });
            }
            let key = (a.min(b), a.max(b));
            if seen.insert(key, e).is_some() {
                return Err(MeshError::BadBoundaryEdge { edge: e, a, b, reason: "listed twice".into() });
            }
            let ts = incidence.get(&key).map(Vec::as_slice).unwrap_or(&[]);
            match ts {
                [t] => {
                    let [i, j, k] = self.tris[*t];
                    let forward = [(i, j), (j, k), (k, i)].contains(&(a, b));
                    if !forward {
                        *verts = [b, a];
                    }
                    self.bedge_tri[e] = *t;
                }
                [] => {
                    return Err(MeshError::BadBoundaryEdge {
                        edge: e,
                        a,
                        b,
                        reason: "not an edge of any triangle".into(),
                    })
                }
                _ => {
                    return Err(MeshError::BadBoundaryEdge {
                        edge: e,
                        a,
                        b,
                        reason: "interior edge (shared by two triangles)".into(),
                    })
                }
            }
        }

        // single closed loop
        let mut next_at: BTreeMap<usize, usize> = BTreeMap::new();
        for (e, &(verts, _)) in self.bedges.iter().enumerate() {
            if next_at.insert(verts[0], e).is_some() {
                return Err(MeshError::OpenBoundary(format!(
                    "node {} has two outgoing boundary edges",
                    verts[0]
                )));
            }
        }
        self.loop_edges.clear();
        let mut e = 0usize;
        for _ in 0..self.bedges.len() {
            self.loop_edges.push(e);
            let to = self.bedges[e].0[1];
            e = *next_at
                .get(&to)
                .ok_or_else(|| MeshError::OpenBoundary(format!("loop breaks at node {to}")))?;
        }
        if e != 0 || self.loop_edges.len() != self.bedges.len() {
            return Err(MeshError::OpenBoundary("boundary edges form more than one loop".into()));
        }

        // contiguous labels
        let mut max_wall = 0usize;
        let mut max_gate = 0usize;
        let mut walls_seen = std::collections::BTreeSet::new();
        let mut gates_seen = std::collections::BTreeSet::new();
        for &(_, label) in &self.bedges {
            match label {
                BoundaryLabel::Wall(w) => {
                    walls_seen.insert(w);
                    max_wall = max_wall.max(w + 1);
                }
                BoundaryLabel::Gate(g) => {
                    gates_seen.insert(g);
                    max_gate = max_gate.max(g + 1);
                }
            }
        }
        if walls_seen.len() != max_wall {
            return Err(MeshError::LabelGap(format!(
                "wall labels go up to w{max_wall} but only {} are used",
                walls_seen.len()
            )));
        }
        if gates_seen.len() != max_gate {
            return Err(MeshError::LabelGap(format!(
                "gate labels go up to g{max_gate} but only {} are used",
                gates_seen.len()
            )));
        }
        if max_wall == 0 {
            return Err(MeshError::LabelGap("a mesh needs at least one wall".into()));
        }
        self.n_walls = max_wall;
        self.n_gates = max_gate;

        // walls may not touch (also precomputes the corner rule's consistency)
        self.wall_of_nodes()?;
        Ok(())
    }
}

fn parse_label(tok: &str) -> Option<BoundaryLabel> {
    let (kind, num) = tok.split_at(1);
    let k: usize = num.parse().ok()?;
    if k == 0 || k > 1_000_000 {
        return None;
    }
    match kind {
        "w" => Some(BoundaryLabel::Wall(k - 1)),
        "g" => Some(BoundaryLabel::Gate(k - 1)),
        _ => None,
    }
}

/// Parameters of the T-joint cross-section: a horizontal yoke bar with a
/// vertical limb attached below its middle, carved out of the bounding
/// rectangle by two window openings. All lengths in meters.
#[derive(Clone, Copy, Debug)]
pub struct TJointParams {
    pub limb_width: f64,
    pub window_width: f64,
    pub window_height: f64,
    pub yoke_height: f64,
    /// Target edge length of the structured triangulation.
    pub mesh_size: f64,
}

impl Default for TJointParams {
    fn default() -> Self {
        // Chosen to visually match the usual three-limb transformer T-joint
        // with equal limb and yoke cross-sections; the coarse level has about
        // 570 free nodes.
        Self {
            limb_width: 0.8,
            window_width: 0.5,
            window_height: 0.5,
            yoke_height: 0.8,
            mesh_size: 0.055,
        }
    }
}

impl TJointParams {
    pub fn width(&self) -> f64 {
        self.limb_width + 2.0 * self.window_width
    }

    pub fn height(&self) -> f64 {
        self.window_height + self.yoke_height
    }
}

/// Generate the T-joint benchmark mesh.
///
/// Boundary labels in counterclockwise loop order `w1 g1 w2 g2 w3 g3`:
/// `w1` limb right side plus right yoke underside, `g1` right yoke end,
/// `w2` yoke top, `g2` left yoke end, `w3` left yoke underside plus limb
/// left side, `g3` limb bottom.
pub fn generate_tjoint(params: &TJointParams) -> Result<Mesh, MeshError> {
    let p = *params;
    for (name, v) in [
        ("limb_width", p.limb_width),
        ("window_width", p.window_width),
        ("window_height", p.window_height),
        ("yoke_height", p.yoke_height),
        ("mesh_size", p.mesh_size),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(MeshError::InfeasibleDimensions(format!("{name} must be positive, got {v}")));
        }
    }
    let (ww, a, hw, hy) = (p.window_width, p.limb_width, p.window_height, p.yoke_height);
    let (width, height) = (p.width(), p.height());
    if p.mesh_size > width.min(height) {
        return Err(MeshError::InfeasibleDimensions(format!(
            "mesh_size {} exceeds the outline {}x{}",
            p.mesh_size, width, height
        )));
    }

    // grid lines snapped to the feature coordinates
    let breaks = |lo: f64, hi: f64, h: f64, out: &mut Vec<f64>| {
        let n = ((hi - lo) / h).round().max(1.0) as usize;
        for i in 1..=n {
            out.push(lo + (hi - lo) * i as f64 / n as f64);
        }
    };
    let mut xs = vec![0.0];
    breaks(0.0, ww, p.mesh_size, &mut xs);
    breaks(ww, ww + a, p.mesh_size, &mut xs);
    breaks(ww + a, width, p.mesh_size, &mut xs);
    let mut ys = vec![0.0];
    breaks(0.0, hw, p.mesh_size, &mut ys);
    breaks(hw, height, p.mesh_size, &mut ys);

    let tol = 1e-9 * width.max(height);
    let in_domain = |x: f64, y: f64| y >= hw - tol || (x >= ww - tol && x <= ww + a + tol);

    let nx = xs.len();
    let ny = ys.len();
    let mut node_id = vec![usize::MAX; nx * ny];
    let mut nodes = Vec::new();
    let mut tris = Vec::new();
    let mut id_of = |i: usize, j: usize, nodes: &mut Vec<Vec2>| {
        let slot = j * nx + i;
        if node_id[slot] == usize::MAX {
            node_id[slot] = nodes.len();
            nodes.push(Vec2::new(xs[i], ys[j]));
        }
        node_id[slot]
    };
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let cx = 0.5 * (xs[i] + xs[i + 1]);
            let cy = 0.5 * (ys[j] + ys[j + 1]);
            if !in_domain(cx, cy) {
                continue;
            }
            let bl = id_of(i, j, &mut nodes);
            let br = id_of(i + 1, j, &mut nodes);
            let tr = id_of(i + 1, j + 1, &mut nodes);
            let tl = id_of(i, j + 1, &mut nodes);
            tris.push([bl, br, tr]);
            tris.push([bl, tr, tl]);
        }
    }

    // boundary edges from incidence counts, labeled geometrically
    let mut incidence: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &[i, j, k] in &tris {
        for (a, b) in [(i, j), (j, k), (k, i)] {
            *incidence.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let mut bedges = Vec::new();
    for (&(va, vb), &count) in &incidence {
        if count != 1 {
            continue;
        }
        let m = (nodes[va] + nodes[vb]).scale(0.5);
        let label = if m.y.abs() < tol {
            BoundaryLabel::Gate(2)
        } else if (m.x - width).abs() < tol {
            BoundaryLabel::Gate(0)
        } else if m.x.abs() < tol {
            BoundaryLabel::Gate(1)
        } else if (m.y - height).abs() < tol {
            BoundaryLabel::Wall(1)
        } else if m.x > ww + a - tol {
            BoundaryLabel::Wall(0)
        } else {
            BoundaryLabel::Wall(2)
        };
        bedges.push(([va, vb], label));
    }

    let regions = vec![1; tris.len()];
    Mesh::new(nodes, tris, regions, bedges)
}

/// Split every triangle into 4 congruent children; boundary labels are
/// inherited by the two child edges.
pub fn refine_uniform(mesh: &Mesh) -> Mesh {
    let mut nodes = mesh.nodes().to_vec();
    let mut midpoint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut mid = |a: usize, b: usize, nodes: &mut Vec<Vec2>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoint.entry(key).or_insert_with(|| {
            let id = nodes.len();
            let p = (nodes[a] + nodes[b]).scale(0.5);
            nodes.push(p);
            id
        })
    };

    let mut tris = Vec::with_capacity(4 * mesh.n_triangles());
    let mut regions = Vec::with_capacity(4 * mesh.n_triangles());
    for (t, &[i, j, k]) in mesh.triangles().iter().enumerate() {
        let ij = mid(i, j, &mut nodes);
        let jk = mid(j, k, &mut nodes);
        let ki = mid(k, i, &mut nodes);
        let r = mesh.regions()[t];
        for child in [[i, ij, ki], [ij, j, jk], [ki, jk, k], [ij, jk, ki]] {
            tris.push(child);
            regions.push(r);
        }
    }

    let mut bedges = Vec::with_capacity(2 * mesh.boundary_edges().len());
    for &([a, b], label) in mesh.boundary_edges() {
        let m = mid(a, b, &mut nodes);
        bedges.push(([a, m], label));
        bedges.push(([m, b], label));
    }

    Mesh::new(nodes, tris, regions, bedges)
        .expect("uniform refinement preserves mesh invariants")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_triangle_text() -> String {
        "mesh2d 3 1 3\n0 0\n1 0\n0 1\n0 1 2 1\n0 1 w1\n1 2 g1\n2 0 w1\n".to_string()
    }

    #[test]
    fn parse_minimal_mesh() {
        let mesh = Mesh::parse(&unit_triangle_text()).unwrap();
        assert_eq!(mesh.n_nodes(), 3);
        assert_eq!(mesh.n_triangles(), 1);
        assert_eq!(mesh.boundary_edges().len(), 3);
        assert!((mesh.total_area() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn reversed_triangle_is_orientation_error() {
        let text = "mesh2d 3 1 3\n0 0\n1 0\n0 1\n0 2 1 1\n0 1 w1\n1 2 g1\n2 0 w1\n";
        match Mesh::parse(text) {
            Err(MeshError::Orientation { triangle: 0, .. }) => {}
            other => panic!("expected orientation error, got {other:?}"),
        }
    }

    #[test]
    fn interior_labeled_edge_is_rejected() {
        // two triangles sharing the diagonal, diagonal listed as boundary
        let text = "mesh2d 4 2 4\n0 0\n1 0\n1 1\n0 1\n0 1 2 1\n0 2 3 1\n0 1 w1\n1 2 g1\n0 2 w2\n3 0 g2\n";
        match Mesh::parse(text) {
            Err(MeshError::BadBoundaryEdge { reason, .. }) => {
                assert!(reason.contains("interior"), "{reason}");
            }
            other => panic!("expected dangling-edge error, got {other:?}"),
        }
    }

    #[test]
    fn unlabeled_boundary_edge_is_rejected() {
        let text = "mesh2d 4 2 3\n0 0\n1 0\n1 1\n0 1\n0 1 2 1\n0 2 3 1\n0 1 w1\n1 2 g1\n2 3 w2\n";
        assert!(matches!(Mesh::parse(text), Err(MeshError::OpenBoundary(_))));
    }

    #[test]
    fn element_geometry_reference_triangle() {
        let mesh = Mesh::parse(&unit_triangle_text()).unwrap();
        let g = mesh.element_geometry(0).unwrap();
        assert!((g.area - 0.5).abs() < 1e-15);
        let [g0, g1, g2] = g.basis_gradients;
        assert_eq!(g0, Vec2::new(-1.0, -1.0));
        assert_eq!(g1, Vec2::new(1.0, 0.0));
        assert_eq!(g2, Vec2::new(0.0, 1.0));
        assert!(mesh.element_geometry(1).is_err());
    }

    #[test]
    fn element_geometry_translation_and_scaling() {
        let make = |shift: Vec2, scale: f64| {
            let pts = [Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
            let nodes = pts.iter().map(|p| p.scale(scale) + shift).collect();
            Mesh::new(
                nodes,
                vec![[0, 1, 2]],
                vec![1],
                vec![
                    ([0, 1], BoundaryLabel::Wall(0)),
                    ([1, 2], BoundaryLabel::Gate(0)),
                    ([2, 0], BoundaryLabel::Wall(0)),
                ],
            )
            .unwrap()
        };
        let base = make(Vec2::ZERO, 1.0).element_geometry(0).unwrap();
        let moved = make(Vec2::new(3.5, -2.0), 1.0).element_geometry(0).unwrap();
        assert!((base.area - moved.area).abs() < 1e-15);
        for i in 0..3 {
            assert!((base.basis_gradients[i] - moved.basis_gradients[i]).norm() < 1e-14);
        }
        let scaled = make(Vec2::ZERO, 2.0).element_geometry(0).unwrap();
        assert!((scaled.area - 4.0 * base.area).abs() < 1e-14);
        for i in 0..3 {
            assert!((scaled.basis_gradients[i] - base.basis_gradients[i].scale(0.5)).norm() < 1e-14);
        }
    }

    #[test]
    fn basis_gradients_sum_to_zero() {
        let mesh = generate_tjoint(&TJointParams::default()).unwrap();
        for t in 0..mesh.n_triangles() {
            let g = mesh.element_geometry(t).unwrap();
            let sum = g.basis_gradients[0] + g.basis_gradients[1] + g.basis_gradients[2];
            let mag = g.basis_gradients.iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(sum.norm() <= 1e-13 * mag, "triangle {t}: {sum:?}");
        }
    }

    #[test]
    fn refine_single_triangle() {
        let mesh = Mesh::parse(&unit_triangle_text()).unwrap();
        let fine = refine_uniform(&mesh);
        assert_eq!(fine.n_triangles(), 4);
        assert_eq!(fine.n_nodes(), 6);
        assert_eq!(fine.boundary_edges().len(), 6);
        assert!((fine.total_area() - mesh.total_area()).abs() < 1e-15);
    }

    #[test]
    fn tjoint_topology_matches_benchmark() {
        let mesh = generate_tjoint(&TJointParams::default()).unwrap();
        assert_eq!(mesh.n_walls(), 3);
        assert_eq!(mesh.n_gates(), 3);
        let topo = mesh.boundary_topology();
        assert_eq!(topo.runs.len(), 6);
        // walls and gates alternate along the loop
        for (r, run) in topo.runs.iter().enumerate() {
            let next = &topo.runs[(r + 1) % topo.runs.len()];
            assert!(
                matches!(
                    (run.label, next.label),
                    (BoundaryLabel::Wall(_), BoundaryLabel::Gate(_))
                        | (BoundaryLabel::Gate(_), BoundaryLabel::Wall(_))
                ),
                "runs {r} and next share a kind"
            );
        }
    }

    #[test]
    fn tjoint_refinement_counts() {
        let mesh = generate_tjoint(&TJointParams::default()).unwrap();
        let fine = refine_uniform(&mesh);
        assert_eq!(fine.n_triangles(), 4 * mesh.n_triangles());
        assert_eq!(fine.boundary_edges().len(), 2 * mesh.boundary_edges().len());
        assert!((fine.total_area() - mesh.total_area()).abs() <= 1e-12 * mesh.total_area());
    }

    #[test]
    fn degenerate_window_is_infeasible() {
        let params = TJointParams { window_height: 0.0, ..TJointParams::default() };
        assert!(matches!(generate_tjoint(&params), Err(MeshError::InfeasibleDimensions(_))));
    }

    #[test]
    fn shoelace_area_matches_triangle_sum() {
        let mesh = generate_tjoint(&TJointParams::default()).unwrap();
        let tri_sum = mesh.total_area();
        let poly = mesh.boundary_polygon_area();
        assert!(
            (tri_sum - poly).abs() <= 1e-12 * poly.abs(),
            "triangle sum {tri_sum} vs shoelace {poly}"
        );
        let fine = refine_uniform(&mesh);
        assert!((fine.total_area() - fine.boundary_polygon_area()).abs() <= 1e-12 * poly.abs());
    }

    #[test]
    fn euler_formula_after_two_refinements() {
        let mesh = generate_tjoint(&TJointParams { mesh_size: 0.2, ..TJointParams::default() }).unwrap();
        let fine = refine_uniform(&refine_uniform(&mesh));
        let mut edges = std::collections::BTreeSet::new();
        for &[i, j, k] in fine.triangles() {
            for (a, b) in [(i, j), (j, k), (k, i)] {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        let v = fine.n_nodes() as i64;
        let e = edges.len() as i64;
        let f = fine.n_triangles() as i64;
        assert_eq!(v - e + f, 1, "disk-like domain must satisfy V - E + F = 1");
    }
}
