//! Minimal XML reader: elements, attributes, comments, processing
//! instructions, CDATA and character references. Namespace prefixes are
//! stripped from element and attribute names. Text content is discarded.

use super::IngestError;

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Element>,
    pub line: usize,
}

impl Element {
    pub fn attr(&self, key: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, IngestError> {
        self.attr(key).ok_or_else(|| IngestError::MissingAttribute {
            element: self.label(),
            attribute: key.to_string(),
        })
    }

    pub fn child(&self, name: &str) -> Option<&Element> {
        self.children.iter().find(|c| c.name == name)
    }

    pub fn children_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Element> {
        self.children.iter().filter(move |c| c.name == name)
    }

    /// `name id="..."` for messages.
    pub fn label(&self) -> String {
        match self.attr("id") {
            Some(id) => format!("{} `{id}`", self.name),
            None => format!("{} (line {})", self.name, self.line),
        }
    }

    /// Depth-first search for the first element with this name.
    pub fn find(&self, name: &str) -> Option<&Element> {
        if self.name == name {
            return Some(self);
        }
        self.children.iter().find_map(|c| c.find(name))
    }
}

fn local(name: &str) -> String {
    name.rsplit(':').next().unwrap_or(name).to_string()
}

struct Cursor<'a> {
    s: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, msg: impl Into<String>) -> IngestError {
        IngestError::Xml {
            line: self.line,
            message: msg.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn starts(&self, pat: &str) -> bool {
        self.s[self.pos..].starts_with(pat.as_bytes())
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
        }
        Some(c)
    }

    fn skip_until(&mut self, pat: &str) -> Result<(), IngestError> {
        while !self.starts(pat) {
            if self.bump().is_none() {
                return Err(self.err(format!("unterminated construct, expected `{pat}`")));
            }
        }
        self.pos += pat.len();
        Ok(())
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c.is_ascii_whitespace()) {
            self.bump();
        }
    }

    fn name(&mut self) -> Result<String, IngestError> {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| !c.is_ascii_whitespace() && !b"=/>\"'<".contains(&c))
        {
            self.bump();
        }
        if start == self.pos {
            return Err(self.err("expected a name"));
        }
        Ok(String::from_utf8_lossy(&self.s[start..self.pos]).into_owned())
    }
}

fn decode(raw: &str, line: usize) -> Result<String, IngestError> {
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(k) = rest.find('&') {
        out.push_str(&rest[..k]);
        let end = rest[k..].find(';').ok_or_else(|| IngestError::Xml {
            line,
            message: "unterminated entity".into(),
        })?;
        let ent = &rest[k + 1..k + end];
        let ch = match ent {
            "amp" => '&',
            "lt" => '<',
            "gt" => '>',
            "quot" => '"',
            "apos" => '\'',
            _ => {
                let code = if let Some(h) = ent.strip_prefix("#x") {
                    u32::from_str_radix(h, 16).ok()
                } else if let Some(d) = ent.strip_prefix('#') {
                    d.parse().ok()
                } else {
                    None
                };
                code.and_then(char::from_u32)
                    .ok_or_else(|| IngestError::Xml {
                        line,
                        message: format!("unknown entity `&{ent};`"),
                    })?
            }
        };
        out.push(ch);
        rest = &rest[k + end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Parses a document and returns its root element.
pub fn parse(text: &str) -> Result<Element, IngestError> {
    let mut c = Cursor {
        s: text.as_bytes(),
        pos: 0,
        line: 1,
    };
    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;
    while c.peek().is_some() {
        if !c.starts("<") {
            c.bump();
            continue;
        }
        if c.starts("<?") {
            c.skip_until("?>")?;
        } else if c.starts("<!--") {
            c.skip_until("-->")?;
        } else if c.starts("<![CDATA[") {
            c.skip_until("]]>")?;
        } else if c.starts("<!") {
            c.skip_until(">")?;
        } else if c.starts("</") {
            c.pos += 2;
            let name = local(&c.name()?);
            c.skip_ws();
            if c.bump() != Some(b'>') {
                return Err(c.err("expected `>`"));
            }
            let el = stack
                .pop()
                .ok_or_else(|| c.err(format!("unexpected closing tag `{name}`")))?;
            if el.name != name {
                return Err(c.err(format!("`{}` closed by `{name}`", el.name)));
            }
            match stack.last_mut() {
                Some(parent) => parent.children.push(el),
                None => root = Some(el),
            }
        } else {
            c.pos += 1;
            let line = c.line;
            let name = local(&c.name()?);
            let mut attrs = Vec::new();
            let closed = loop {
                c.skip_ws();
                match c.peek() {
                    Some(b'/') => {
                        c.bump();
                        if c.bump() != Some(b'>') {
                            return Err(c.err("expected `>` after `/`"));
                        }
                        break true;
                    }
                    Some(b'>') => {
                        c.bump();
                        break false;
                    }
                    Some(_) => {
                        let key = local(&c.name()?);
                        c.skip_ws();
                        if c.bump() != Some(b'=') {
                            return Err(c.err(format!("attribute `{key}` lacks a value")));
                        }
                        c.skip_ws();
                        let q = c.bump().filter(|&q| q == b'"' || q == b'\'');
                        let Some(q) = q else {
                            return Err(c.err(format!("attribute `{key}` is not quoted")));
                        };
                        let start = c.pos;
                        while c.peek().is_some_and(|ch| ch != q) {
                            c.bump();
                        }
                        if c.peek().is_none() {
                            return Err(c.err("unterminated attribute value"));
                        }
                        let raw = String::from_utf8_lossy(&c.s[start..c.pos]).into_owned();
                        c.bump();
                        attrs.push((key, decode(&raw, c.line)?));
                    }
                    None => return Err(c.err("unterminated tag")),
                }
            };
            let el = Element {
                name,
                attrs,
                children: Vec::new(),
                line,
            };
            if closed {
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None => root = Some(el),
                }
            } else {
                stack.push(el);
            }
        }
        if root.is_some() && stack.is_empty() {
            // trailing content after the root is ignored
            break;
        }
    }
    if let Some(open) = stack.last() {
        return Err(c.err(format!("element `{}` is never closed", open.name)));
    }
    root.ok_or_else(|| c.err("document has no root element"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_elements_and_attributes() {
        let doc = r#"<?xml version="1.0"?>
<!-- comment -->
<fw:network xmlns:fw="x">
  <fw:nodes>
    <innode id="a &amp; b" x='1'><pressureMin value="1" unit="bar"/></innode>
  </fw:nodes>
</fw:network>"#;
        let root = parse(doc).unwrap();
        assert_eq!(root.name, "network");
        let node = root.find("innode").unwrap();
        assert_eq!(node.attr("id"), Some("a & b"));
        assert_eq!(node.line, 5);
        assert_eq!(node.child("pressureMin").unwrap().attr("unit"), Some("bar"));
    }

    #[test]
    fn mismatched_tags() {
        let e = parse("<a><b></a>").unwrap_err();
        assert!(matches!(e, IngestError::Xml { .. }));
        assert!(parse("<a>").is_err());
        assert!(parse("<a x=1/>").is_err());
    }

    #[test]
    fn numeric_references() {
        let root = parse(r#"<a v="&#65;&#x42;"/>"#).unwrap();
        assert_eq!(root.attr("v"), Some("AB"));
    }
}
