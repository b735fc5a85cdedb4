//! Minimal URDF 1.0 reader: links with visual/collision geometry and joints.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::pose::Pose;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Box { size: [f64; 3] },
    Cylinder { radius: f64, length: f64 },
    Sphere { radius: f64 },
    Mesh { filename: String, scale: [f64; 3] },
}

/// One geometry element attached to a link, expressed in the link frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub origin: Pose,
    pub shape: Shape,
}

#[derive(Debug, Clone)]
pub(crate) struct RawLink {
    pub name: String,
    pub visuals: Vec<Geometry>,
    pub collisions: Vec<Geometry>,
}

#[derive(Debug, Clone)]
pub(crate) struct RawJoint {
    pub name: String,
    pub kind: String,
    pub parent: String,
    pub child: String,
    pub origin: Pose,
    pub axis: Vector3<f64>,
    pub limit: Option<(f64, f64)>,
    pub line: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct RawRobot {
    pub name: String,
    pub links: Vec<RawLink>,
    pub joints: Vec<RawJoint>,
}

fn line_of(doc: &roxmltree::Document, node: roxmltree::Node) -> usize {
    doc.text_pos_at(node.range().start).row as usize
}

fn parse_floats<const N: usize>(
    doc: &roxmltree::Document,
    node: roxmltree::Node,
    attr: &str,
    default: Option<[f64; N]>,
) -> Result<[f64; N]> {
    let line = line_of(doc, node);
    let Some(text) = node.attribute(attr) else {
        return default.ok_or_else(|| Error::Parse {
            line,
            message: format!("<{}> is missing attribute `{attr}`", node.tag_name().name()),
        });
    };
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse {
            line,
            message: format!("attribute `{attr}`=\"{text}\": {e}"),
        })?;
    values.try_into().map_err(|v: Vec<f64>| Error::Parse {
        line,
        message: format!("attribute `{attr}` expects {N} numbers, found {}", v.len()),
    })
}

fn parse_origin(doc: &roxmltree::Document, parent: roxmltree::Node) -> Result<Pose> {
    match child(parent, "origin") {
        Some(o) => {
            let xyz = parse_floats(doc, o, "xyz", Some([0.0; 3]))?;
            let rpy = parse_floats(doc, o, "rpy", Some([0.0; 3]))?;
            Ok(Pose::from_xyz_rpy(xyz, rpy))
        }
        None => Ok(Pose::identity()),
    }
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, tag: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children()
        .find(|c| c.is_element() && c.tag_name().name() == tag)
}

fn required_attr<'a>(
    doc: &roxmltree::Document,
    node: roxmltree::Node<'a, '_>,
    attr: &str,
) -> Result<&'a str> {
    node.attribute(attr).ok_or_else(|| Error::Parse {
        line: line_of(doc, node),
        message: format!("<{}> is missing attribute `{attr}`", node.tag_name().name()),
    })
}

fn parse_geometry(doc: &roxmltree::Document, elem: roxmltree::Node) -> Result<Option<Geometry>> {
    let origin = parse_origin(doc, elem)?;
    let Some(geom) = child(elem, "geometry") else {
        return Ok(None);
    };
    let Some(shape_node) = geom.children().find(|c| c.is_element()) else {
        return Ok(None);
    };
    let shape = match shape_node.tag_name().name() {
        "box" => Shape::Box {
            size: parse_floats(doc, shape_node, "size", None)?,
        },
        "cylinder" => {
            let [radius] = parse_floats(doc, shape_node, "radius", None)?;
            let [length] = parse_floats(doc, shape_node, "length", None)?;
            Shape::Cylinder { radius, length }
        }
        "sphere" => {
            let [radius] = parse_floats(doc, shape_node, "radius", None)?;
            Shape::Sphere { radius }
        }
        "mesh" => Shape::Mesh {
            filename: required_attr(doc, shape_node, "filename")?.to_string(),
            scale: parse_floats(doc, shape_node, "scale", Some([1.0; 3]))?,
        },
        other => {
            return Err(Error::Parse {
                line: line_of(doc, shape_node),
                message: format!("unsupported geometry <{other}>"),
            })
        }
    };
    Ok(Some(Geometry { origin, shape }))
}

pub(crate) fn parse(text: &str) -> Result<RawRobot> {
    let doc = roxmltree::Document::parse(text).map_err(|e| Error::Parse {
        line: e.pos().row as usize,
        message: e.to_string(),
    })?;
    let root = doc.root_element();
    if root.tag_name().name() != "robot" {
        return Err(Error::Parse {
            line: line_of(&doc, root),
            message: format!("expected <robot> root element, found <{}>", root.tag_name().name()),
        });
    }
    let mut robot = RawRobot {
        name: root.attribute("name").unwrap_or("robot").to_string(),
        links: Vec::new(),
        joints: Vec::new(),
    };

    for node in root.children().filter(|n| n.is_element()) {
        match node.tag_name().name() {
            "link" => {
                let mut link = RawLink {
                    name: required_attr(&doc, node, "name")?.to_string(),
                    visuals: Vec::new(),
                    collisions: Vec::new(),
                };
                for g in node.children().filter(|n| n.is_element()) {
                    match g.tag_name().name() {
                        "visual" => link.visuals.extend(parse_geometry(&doc, g)?),
                        "collision" => link.collisions.extend(parse_geometry(&doc, g)?),
                        _ => {}
                    }
                }
                robot.links.push(link);
            }
            "joint" => {
                let line = line_of(&doc, node);
                let name = required_attr(&doc, node, "name")?.to_string();
                let kind = required_attr(&doc, node, "type")?.to_string();
                let link_ref = |tag: &str| -> Result<String> {
                    let n = child(node, tag).ok_or_else(|| Error::Parse {
                        line,
                        message: format!("joint `{name}` has no <{tag}>"),
                    })?;
                    Ok(required_attr(&doc, n, "link")?.to_string())
                };
                let parent = link_ref("parent")?;
                let child_link = link_ref("child")?;
                let axis = match child(node, "axis") {
                    Some(a) => Vector3::from(parse_floats(&doc, a, "xyz", Some([1.0, 0.0, 0.0]))?),
                    None => Vector3::x(),
                };
                let limit = match child(node, "limit") {
                    Some(l) => {
                        let lower = l.attribute("lower");
                        let upper = l.attribute("upper");
                        match (lower, upper) {
                            (None, None) => None,
                            _ => {
                                let [lo] = parse_floats(&doc, l, "lower", Some([0.0]))?;
                                let [hi] = parse_floats(&doc, l, "upper", Some([0.0]))?;
                                Some((lo, hi))
                            }
                        }
                    }
                    None => None,
                };
                robot.joints.push(RawJoint {
                    name,
                    kind,
                    parent,
                    child: child_link,
                    origin: parse_origin(&doc, node)?,
                    axis,
                    limit,
                    line,
                });
            }
            _ => {}
        }
    }
    Ok(robot)
}
