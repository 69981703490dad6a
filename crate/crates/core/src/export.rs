//! OBJ and CSV writers.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::bour::{FundamentalForm, Mesh};
use crate::deform::DeformationFamily;
use crate::invariants::{kappa_nu, kappa_t};
use crate::profile::EdgeData;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn obj_string(mesh: &Mesh, data: &EdgeData) -> String {
    let mut out = String::new();
    writeln!(out, "# bour-edge {VERSION} datum={}", data.to_json()).unwrap();
    if let Some(r) = mesh.singular_row {
        writeln!(out, "# singular_row={r}").unwrap();
    }
    for p in &mesh.points {
        let [x, y, z] = p.position;
        writeln!(out, "v {} {} {}", num(x), num(y), num(z)).unwrap();
    }
    for q in mesh.quads() {
        writeln!(out, "f {} {} {} {}", q[0] + 1, q[1] + 1, q[2] + 1, q[3] + 1).unwrap();
    }
    out
}

pub fn write_obj(path: &Path, mesh: &Mesh, data: &EdgeData) -> io::Result<()> {
    fs::write(path, obj_string(mesh, data))
}

pub fn fundamental_form_csv(rows: &[(f64, f64, FundamentalForm)]) -> String {
    let mut out = String::from("s,t,E,F,G\n");
    for (s, t, ff) in rows {
        writeln!(out, "{},{},{},{},{}", num(*s), num(*t), num(ff.e), num(ff.f), num(ff.g)).unwrap();
    }
    out
}

/// `member_h<val>_m<val>.obj`
pub fn member_file_name(h: f64, m: f64) -> String {
    format!("member_h{h}_m{m}.obj")
}

pub fn family_csv(family: &DeformationFamily) -> String {
    let mut out = String::from("h,m,valid,kappa_nu,kappa_t,edge_type\n");
    for mem in &family.members {
        match &mem.data {
            Some(d) => writeln!(
                out,
                "{},{},true,{},{},{}",
                num(mem.h),
                num(mem.m),
                num(kappa_nu(d)),
                num(kappa_t(d)),
                mem.edge_type.map(|t| t.as_str()).unwrap_or("")
            ),
            None => writeln!(out, "{},{},false,,,", num(mem.h), num(mem.m)),
        }
        .unwrap();
    }
    out
}

/// Writes `family.csv` and one OBJ per valid member, built by `mesh_of`.
pub fn write_family<F, E>(dir: &Path, family: &DeformationFamily, mut mesh_of: F) -> Result<Vec<PathBuf>, E>
where
    F: FnMut(&EdgeData) -> Result<Mesh, E>,
    E: From<io::Error>,
{
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for mem in &family.members {
        if let Some(d) = &mem.data {
            let path = dir.join(member_file_name(mem.h, mem.m));
            write_obj(&path, &mesh_of(d)?, d)?;
            written.push(path);
        }
    }
    let csv = dir.join("family.csv");
    fs::write(&csv, family_csv(family))?;
    written.push(csv);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bour::sample_mesh;
    use crate::expr::parse_expr;
    use crate::profile::{make_edge_data, Interval, Sign};

    #[test]
    fn obj_layout() {
        let d = make_edge_data(
            parse_expr("1 - s*cos(s) + sin(s)").unwrap(),
            0.2,
            1.0,
            Sign::Plus,
            Sign::Plus,
            Sign::Minus,
            1,
            Interval::new(-0.8, 0.8),
        )
        .unwrap();
        let mesh = sample_mesh(&d, Interval::new(-0.5, 0.5), Interval::new(0.0, 1.0), 3, 4, 1e-12).unwrap();
        let obj = obj_string(&mesh, &d);
        let lines: Vec<&str> = obj.lines().collect();
        assert!(lines[0].starts_with("# bour-edge ") && lines[0].contains("datum={\"U\":"));
        assert_eq!(lines.iter().filter(|l| l.starts_with("v ")).count(), 12);
        let faces: Vec<&&str> = lines.iter().filter(|l| l.starts_with("f ")).collect();
        assert_eq!(faces.len(), 6);
        assert_eq!(*faces[0], "f 1 5 6 2");
        assert_eq!(member_file_name(0.2, 1.0), "member_h0.2_m1.obj");
    }
}
