//! ASCII mesh files in the sectioned 2.2 format.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::mesh::Mesh;
use crate::quadrature::{ElementKind, TET10_EDGES};
use crate::FeError;

/// Nodes per element for the accepted element types.
fn type_nodes(t: u32) -> Option<usize> {
    Some(match t {
        1 => 2,
        2 => 3,
        3 => 4,
        4 => 4,
        5 => 8,
        8 => 3,
        9 => 6,
        11 => 10,
        15 => 1,
        _ => return None,
    })
}

fn malformed(section: &str, detail: impl std::fmt::Display) -> FeError {
    FeError::Msh(format!("malformed {section} section: {detail}"))
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    fn next_nonempty(&mut self) -> Option<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            let t = l.trim();
            if !t.is_empty() {
                return Some((i + 1, t));
            }
        }
        None
    }

    fn expect(&mut self, section: &str) -> Result<&'a str, FeError> {
        self.next_nonempty().map(|(_, l)| l).ok_or_else(|| malformed(section, "unexpected end of file"))
    }
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, section: &str) -> Result<T, FeError> {
    let tok = tok.ok_or_else(|| malformed(section, "missing field"))?;
    tok.parse().map_err(|_| malformed(section, format!("bad number {tok:?}")))
}

pub fn parse_msh(path: &Path) -> Result<Mesh, FeError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| FeError::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_msh_str(&text)
}

pub fn parse_msh_str(text: &str) -> Result<Mesh, FeError> {
    let mut lines = Lines { inner: text.lines().enumerate().peekable() };
    let mut names: HashMap<u32, String> = HashMap::new();
    let mut node_ids: HashMap<u64, usize> = HashMap::new();
    let mut nodes: Vec<[f64; 3]> = Vec::new();
    let mut volume: Vec<(u32, Vec<u64>)> = Vec::new();
    let mut grouped: Vec<(u32, Vec<u64>)> = Vec::new();
    let mut seen_format = false;
    while let Some((_, header)) = lines.next_nonempty() {
        let section = header
            .strip_prefix('$')
            .ok_or_else(|| FeError::Msh(format!("expected a section header, found {header:?}")))?
            .to_string();
        match section.as_str() {
            "MeshFormat" => {
                let l = lines.expect(&section)?;
                let mut it = l.split_whitespace();
                let version: f64 = parse_num(it.next(), &section)?;
                let file_type: u32 = parse_num(it.next(), &section)?;
                if !(2.0..3.0).contains(&version) || file_type != 0 {
                    return Err(FeError::Msh(format!("unsupported format version {version} type {file_type}")));
                }
                seen_format = true;
            }
            "PhysicalNames" => {
                let count: usize = parse_num(Some(lines.expect(&section)?), &section)?;
                for _ in 0..count {
                    let l = lines.expect(&section)?;
                    let mut it = l.splitn(3, char::is_whitespace);
                    let _dim: u32 = parse_num(it.next(), &section)?;
                    let tag: u32 = parse_num(it.next(), &section)?;
                    let name = it.next().ok_or_else(|| malformed(&section, "missing name"))?.trim().trim_matches('"');
                    names.insert(tag, name.to_string());
                }
            }
            "Nodes" => {
                let count: usize = parse_num(Some(lines.expect(&section)?), &section)?;
                for _ in 0..count {
                    let l = lines.expect(&section)?;
                    let mut it = l.split_whitespace();
                    let id: u64 = parse_num(it.next(), &section)?;
                    let x = [parse_num(it.next(), &section)?, parse_num(it.next(), &section)?, parse_num(it.next(), &section)?];
                    if node_ids.insert(id, nodes.len()).is_some() {
                        return Err(malformed(&section, format!("duplicate node {id}")));
                    }
                    nodes.push(x);
                }
            }
            "Elements" => {
                let count: usize = parse_num(Some(lines.expect(&section)?), &section)?;
                for _ in 0..count {
                    let l = lines.expect(&section)?;
                    let mut it = l.split_whitespace();
                    let _id: u64 = parse_num(it.next(), &section)?;
                    let etype: u32 = parse_num(it.next(), &section)?;
                    let ntags: usize = parse_num(it.next(), &section)?;
                    let tags: Vec<u32> = (0..ntags).map(|_| parse_num(it.next(), &section)).collect::<Result<_, _>>()?;
                    let nn = type_nodes(etype).ok_or(FeError::UnsupportedElement(etype))?;
                    let conn: Vec<u64> = (0..nn).map(|_| parse_num(it.next(), &section)).collect::<Result<_, _>>()?;
                    if it.next().is_some() {
                        return Err(malformed(&section, format!("trailing data on element line {l:?}")));
                    }
                    if matches!(etype, 4 | 5 | 11) {
                        volume.push((etype, conn.clone()));
                    }
                    if let Some(&phys) = tags.first() {
                        if phys != 0 {
                            grouped.push((phys, conn));
                        }
                    }
                }
            }
            other => return Err(FeError::Msh(format!("unknown section ${other}"))),
        }
        let end = lines.expect(&section)?;
        if end != format!("$End{section}") {
            return Err(malformed(&section, format!("expected $End{section}, found {end:?}")));
        }
    }
    if !seen_format {
        return Err(FeError::Msh("missing $MeshFormat section".into()));
    }
    let resolve = |id: u64| node_ids.get(&id).copied().ok_or_else(|| FeError::Msh(format!("element references unknown node {id}")));
    let kinds: Vec<u32> = {
        let mut k: Vec<u32> = volume.iter().map(|(t, _)| *t).collect();
        k.sort_unstable();
        k.dedup();
        k
    };
    let (kind, promote) = match kinds.as_slice() {
        [5] => (ElementKind::Hex8, false),
        [11] => (ElementKind::Tet10, false),
        [4] => (ElementKind::Tet10, true),
        [] => return Err(FeError::Msh("no volume elements".into())),
        _ => return Err(FeError::Msh(format!("mixed volume element types {kinds:?}"))),
    };
    let mut elements: Vec<Vec<usize>> =
        volume.iter().map(|(_, c)| c.iter().map(|&id| resolve(id)).collect()).collect::<Result<_, _>>()?;
    if promote {
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for conn in &mut elements {
            let corners = conn.clone();
            for [a, b] in TET10_EDGES {
                let key = (corners[a].min(corners[b]), corners[a].max(corners[b]));
                let id = *edges.entry(key).or_insert_with(|| {
                    let (pa, pb) = (nodes[key.0], nodes[key.1]);
                    nodes.push(std::array::from_fn(|d| 0.5 * (pa[d] + pb[d])));
                    nodes.len() - 1
                });
                conn.push(id);
            }
        }
    }
    let mut sets: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (phys, conn) in grouped {
        let name = names.get(&phys).cloned().unwrap_or_else(|| format!("group{phys}"));
        let entry = sets.entry(name).or_default();
        for id in conn {
            entry.push(resolve(id)?);
        }
    }
    for v in sets.values_mut() {
        v.sort_unstable();
        v.dedup();
    }
    let mesh = Mesh { nodes, elements, kind, sets };
    mesh.validate()?;
    Ok(mesh)
}

/// Serializes nodes, volume elements and each named set as a physical group of point elements.
pub fn write_msh_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "$MeshFormat\n2.2 0 8\n$EndMeshFormat");
    if !mesh.sets.is_empty() {
        let _ = writeln!(s, "$PhysicalNames\n{}", mesh.sets.len());
        for (i, name) in mesh.sets.keys().enumerate() {
            let _ = writeln!(s, "0 {} \"{name}\"", i + 1);
        }
        let _ = writeln!(s, "$EndPhysicalNames");
    }
    let _ = writeln!(s, "$Nodes\n{}", mesh.nodes.len());
    for (i, x) in mesh.nodes.iter().enumerate() {
        let _ = writeln!(s, "{} {:e} {:e} {:e}", i + 1, x[0], x[1], x[2]);
    }
    let _ = writeln!(s, "$EndNodes");
    let set_points: usize = mesh.sets.values().map(Vec::len).sum();
    let _ = writeln!(s, "$Elements\n{}", mesh.elements.len() + set_points);
    let etype = match mesh.kind {
        ElementKind::Hex8 => 5,
        ElementKind::Tet10 => 11,
    };
    let mut id = 0usize;
    for conn in &mesh.elements {
        id += 1;
        let _ = write!(s, "{id} {etype} 2 0 1");
        for n in conn {
            let _ = write!(s, " {}", n + 1);
        }
        s.push('\n');
    }
    for (g, nodes) in mesh.sets.values().enumerate() {
        for n in nodes {
            id += 1;
            let _ = writeln!(s, "{id} 15 2 {} {} {}", g + 1, g + 1, n + 1);
        }
    }
    let _ = writeln!(s, "$EndElements");
    s
}

pub fn write_msh(mesh: &Mesh, path: &Path) -> Result<(), FeError> {
    std::fs::write(path, write_msh_string(mesh)).map_err(|e| FeError::Io(format!("cannot write {}: {e}", path.display())))
}
