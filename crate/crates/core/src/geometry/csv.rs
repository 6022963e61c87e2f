//! Cloud CSV format: optional `#` comment lines, a header row naming the
//! columns, then one row per point. Column groups appear in the order
//! `x,y,z`, `nx,ny,nz`, `cnx,cny,cnz`, `kappa`; absent groups are omitted.
//! A `# seed = N` comment restores the cloud seed.

use std::io::{BufRead, Write};

use super::PointCloud;
use crate::error::{Error, Result};

const GROUPS: [&[&str]; 4] = [
    &["x", "y", "z"],
    &["nx", "ny", "nz"],
    &["cnx", "cny", "cnz"],
    &["kappa"],
];

pub fn write_cloud_csv<W: Write>(cloud: &PointCloud, comments: &[String], mut out: W) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "# seed = {}", cloud.seed)?;
    let has_normals = !cloud.normals.is_empty();
    let present = [
        true,
        has_normals,
        cloud.conormals.is_some(),
        cloud.curvature.is_some(),
    ];
    let header: Vec<&str> = GROUPS
        .iter()
        .zip(present)
        .filter(|(_, p)| *p)
        .flat_map(|(g, _)| g.iter().copied())
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for i in 0..cloud.len() {
        let mut fields: Vec<f64> = cloud.points[i].to_vec();
        if has_normals {
            fields.extend(cloud.normals[i]);
        }
        if let Some(c) = &cloud.conormals {
            fields.extend(c[i]);
        }
        if let Some(k) = &cloud.curvature {
            fields.push(k[i]);
        }
        let row: Vec<String> = fields.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_cloud_csv<R: BufRead>(input: R) -> Result<PointCloud> {
    let mut cloud = PointCloud::default();
    let mut present: Option<[bool; 4]> = None;
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let parse_err = |message: String| Error::Parse { line: lineno, message };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("seed = ") {
                cloud.seed = v.trim().parse().map_err(|e| parse_err(format!("bad seed: {e}")))?;
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let Some(groups) = present else {
            let mut flags = [false; 4];
            let mut rest = fields.as_slice();
            for (g, flag) in GROUPS.iter().zip(flags.iter_mut()) {
                if rest.len() >= g.len() && rest[..g.len()] == **g {
                    *flag = true;
                    rest = &rest[g.len()..];
                }
            }
            if !flags[0] || !rest.is_empty() {
                return Err(parse_err(format!("unrecognized header '{trimmed}'")));
            }
            if flags[2] {
                cloud.conormals = Some(Vec::new());
            }
            if flags[3] {
                cloud.curvature = Some(Vec::new());
            }
            present = Some(flags);
            continue;
        };
        let values = fields
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(e.to_string()))?;
        let width: usize = GROUPS
            .iter()
            .zip(groups)
            .filter(|(_, p)| *p)
            .map(|(g, _)| g.len())
            .sum();
        if values.len() != width {
            return Err(parse_err(format!("expected {width} fields, found {}", values.len())));
        }
        let mut it = values.into_iter();
        let mut take3 = || [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()];
        cloud.points.push(take3());
        if groups[1] {
            cloud.normals.push(take3());
        }
        if let Some(c) = cloud.conormals.as_mut() {
            c.push(take3());
        }
        if let Some(k) = cloud.curvature.as_mut() {
            k.push(it.next().unwrap());
        }
    }
    if present.is_none() {
        return Err(Error::Parse {
            line: 0,
            message: "missing header row".into(),
        });
    }
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_curve_cloud, CloudParams, Curve, Shape};

    fn roundtrip(cloud: &PointCloud) -> PointCloud {
        let mut buf = Vec::new();
        write_cloud_csv(cloud, &["test cloud".into()], &mut buf).unwrap();
        read_cloud_csv(buf.as_slice()).unwrap()
    }

    #[test]
    fn roundtrip_is_exact() {
        let cloud = generate_curve_cloud(&Shape::WavyCatenoid, Curve::Upper, &CloudParams::new(30, 42))
            .unwrap()
            .with_curvature(&Shape::WavyCatenoid)
            .unwrap();
        assert_eq!(roundtrip(&cloud), cloud);
        let bare = PointCloud {
            points: vec![[0.1, -0.2, 1e-300], [1.0 / 3.0, 0.0, -0.0]],
            seed: 9,
            ..Default::default()
        };
        assert_eq!(roundtrip(&bare), bare);
    }

    #[test]
    fn curvature_without_conormals() {
        let cloud = PointCloud {
            points: vec![[0.0, 0.0, 1.0]],
            normals: vec![[0.0, 0.0, 1.0]],
            curvature: Some(vec![2.0]),
            ..Default::default()
        };
        assert_eq!(roundtrip(&cloud), cloud);
    }

    #[test]
    fn malformed_inputs() {
        assert!(read_cloud_csv("x,y\n1,2\n".as_bytes()).is_err());
        assert!(read_cloud_csv("x,y,z\n1,2\n".as_bytes()).is_err());
        assert!(read_cloud_csv("x,y,z\n1,2,abc\n".as_bytes()).is_err());
        assert!(read_cloud_csv("# only comments\n".as_bytes()).is_err());
    }
}
