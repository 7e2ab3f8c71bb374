use roxmltree::{Document, Node};

use super::ParseError;
use crate::behavior::{Behavior, TreeNode};

fn line_of(node: Node) -> u32 {
    node.document().text_pos_at(node.range().start).row
}

fn element_children<'a, 'i>(node: Node<'a, 'i>) -> Result<Vec<Node<'a, 'i>>, ParseError> {
    let mut out = Vec::new();
    for c in node.children() {
        if c.is_element() {
            out.push(c);
        } else if c.is_text() && !c.text().unwrap_or("").trim().is_empty() {
            return Err(ParseError::schema(
                format!("line {}", line_of(node)),
                format!("unexpected text inside <{}>", node.tag_name().name()),
            ));
        }
    }
    Ok(out)
}

fn attr(node: Node, name: &str) -> Option<String> {
    node.attribute(name).map(str::to_string)
}

fn required_attr(node: Node, name: &str) -> Result<String, ParseError> {
    attr(node, name).ok_or_else(|| {
        ParseError::schema(
            format!("line {}", line_of(node)),
            format!("<{}> needs a `{name}` attribute", node.tag_name().name()),
        )
    })
}

fn numeric_attr<T: std::str::FromStr>(node: Node, name: &str, value: &str) -> Result<T, ParseError> {
    value.trim().parse().map_err(|_| {
        ParseError::schema(
            format!("line {}", line_of(node)),
            format!("`{name}` must be a non-negative integer, got `{value}`"),
        )
    })
}

fn single_child(node: Node) -> Result<Box<TreeNode>, ParseError> {
    let kids = element_children(node)?;
    if kids.len() != 1 {
        return Err(ParseError::ArityError {
            node: format!("{} on line {}", node.tag_name().name(), line_of(node)),
            reason: format!("needs exactly one child, has {}", kids.len()),
        });
    }
    Ok(Box::new(convert(kids[0])?))
}

fn convert(node: Node) -> Result<TreeNode, ParseError> {
    let tag = node.tag_name().name();
    let many = |node: Node| -> Result<Vec<TreeNode>, ParseError> {
        element_children(node)?.into_iter().map(convert).collect()
    };
    Ok(match tag {
        "Sequence" => TreeNode::Sequence { children: many(node)? },
        "Fallback" => TreeNode::Fallback { children: many(node)? },
        "Parallel" => {
            let children = many(node)?;
            // without an explicit threshold every child has to succeed
            let threshold = match attr(node, "threshold") {
                Some(t) => numeric_attr(node, "threshold", &t)?,
                None => children.len(),
            };
            TreeNode::Parallel { threshold, children }
        }
        "Condition" | "Action" => {
            if !element_children(node)?.is_empty() {
                return Err(ParseError::ArityError {
                    node: format!("{tag} on line {}", line_of(node)),
                    reason: "leaves cannot have children".into(),
                });
            }
            let name = required_attr(node, "name")?;
            let input = attr(node, "input").unwrap_or_default();
            if tag == "Action" {
                TreeNode::Action { name, input }
            } else {
                TreeNode::Condition { name, input }
            }
        }
        "Inverter" => TreeNode::Inverter {
            child: single_child(node)?,
        },
        "Retry" => TreeNode::Retry {
            attempts: numeric_attr(node, "num", &required_attr(node, "num")?)?,
            child: single_child(node)?,
        },
        other => return Err(ParseError::UnknownElement(other.to_string())),
    })
}

/// `<BehaviorTree>` holding exactly one node.
pub fn parse_tree(payload: &str) -> Result<Behavior, ParseError> {
    let doc = Document::parse(payload).map_err(|e| ParseError::XmlError {
        line: e.pos().row,
        message: e.to_string(),
    })?;
    let root = doc.root_element();
    if root.tag_name().name() != "BehaviorTree" {
        return Err(ParseError::UnknownElement(root.tag_name().name().to_string()));
    }
    let top = single_child(root).map_err(|e| match e {
        ParseError::ArityError { reason, .. } => ParseError::ArityError {
            node: "BehaviorTree".into(),
            reason,
        },
        other => other,
    })?;
    top.check_arity()?;
    Ok(Behavior::tree(*top))
}
