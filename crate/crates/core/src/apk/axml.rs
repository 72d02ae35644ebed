//! Android binary XML (compiled `AndroidManifest.xml`).
//!
//! Only the chunk types needed to recover manifest declarations are
//! interpreted: the string pool, the resource-id map and element start/end
//! nodes. Unknown chunks are skipped.

use thiserror::Error;

use crate::bytes::{slice, u16_le, u32_le, u8_at, OutOfBounds};

const RES_STRING_POOL: u16 = 0x0001;
const RES_XML: u16 = 0x0003;
const RES_XML_START_NAMESPACE: u16 = 0x0100;
const RES_XML_END_NAMESPACE: u16 = 0x0101;
const RES_XML_START_ELEMENT: u16 = 0x0102;
const RES_XML_END_ELEMENT: u16 = 0x0103;
const RES_XML_RESOURCE_MAP: u16 = 0x0180;

const UTF8_FLAG: u32 = 1 << 8;
const NO_INDEX: u32 = 0xffff_ffff;

/// Resource id of the `android:name` attribute.
pub const ATTR_NAME: u32 = 0x0101_0003;

const TYPE_REFERENCE: u8 = 0x01;
const TYPE_STRING: u8 = 0x03;
const TYPE_INT_DEC: u8 = 0x10;
const TYPE_INT_BOOLEAN: u8 = 0x12;

pub const ANDROID_NS: &str = "http://schemas.android.com/apk/res/android";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed binary manifest at offset {offset}")]
pub struct MalformedManifest {
    pub offset: usize,
}

impl From<OutOfBounds> for MalformedManifest {
    fn from(e: OutOfBounds) -> Self {
        MalformedManifest { offset: e.0 }
    }
}

fn bad(offset: usize) -> MalformedManifest {
    MalformedManifest { offset }
}

/// Declarations recovered from a manifest, in document order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ManifestInfo {
    pub package: Option<String>,
    pub permissions: Vec<String>,
    pub hardware_features: Vec<String>,
    pub components: Vec<String>,
    pub intent_filters: Vec<String>,
}

const COMPONENT_TAGS: [&str; 5] = [
    "activity",
    "activity-alias",
    "service",
    "receiver",
    "provider",
];

pub fn parse_axml(buf: &[u8]) -> Result<ManifestInfo, MalformedManifest> {
    let kind = u16_le(buf, 0).map_err(|_| bad(0))?;
    let header = u16_le(buf, 2).map_err(|_| bad(0))?;
    let size = u32_le(buf, 4).map_err(|_| bad(0))? as usize;
    if kind != RES_XML || header != 8 || size != buf.len() {
        return Err(bad(0));
    }

    let mut strings: Vec<String> = Vec::new();
    let mut resource_ids: Vec<u32> = Vec::new();
    let mut stack: Vec<String> = Vec::new();
    let mut info = ManifestInfo::default();
    let mut pos = 8usize;
    while pos < size {
        let ctype = u16_le(buf, pos)?;
        let hsize = u16_le(buf, pos + 2)? as usize;
        let csize = u32_le(buf, pos + 4)? as usize;
        if hsize < 8 || csize < hsize || pos.checked_add(csize).is_none_or(|e| e > size) {
            return Err(bad(pos));
        }
        let chunk = &buf[pos..pos + csize];
        match ctype {
            RES_STRING_POOL => {
                if !strings.is_empty() {
                    return Err(bad(pos));
                }
                strings = parse_string_pool(chunk, hsize).map_err(|e| bad(pos + e.offset))?;
            }
            RES_XML_RESOURCE_MAP => {
                if !(csize - hsize).is_multiple_of(4) {
                    return Err(bad(pos));
                }
                resource_ids = (hsize..csize)
                    .step_by(4)
                    .map(|o| u32_le(chunk, o))
                    .collect::<Result<_, _>>()
                    .map_err(|e| bad(pos + e.0))?;
            }
            RES_XML_START_ELEMENT => {
                let el = parse_start_element(chunk, hsize, &strings, &resource_ids)
                    .map_err(|e| bad(pos + e.offset))?;
                handle_element(&el, &stack, &mut info);
                stack.push(el.name);
            }
            RES_XML_END_ELEMENT => {
                if hsize != 16 || csize != 24 {
                    return Err(bad(pos));
                }
                let name = string_at(&strings, u32_le(chunk, 20)?).ok_or(bad(pos + 20))?;
                match stack.pop() {
                    Some(open) if open == name => {}
                    _ => return Err(bad(pos)),
                }
            }
            RES_XML_START_NAMESPACE | RES_XML_END_NAMESPACE if (hsize != 16 || csize != 24) => {
                return Err(bad(pos));
            }
            _ => {}
        }
        pos += csize;
    }
    if !stack.is_empty() {
        return Err(bad(size));
    }
    Ok(info)
}

struct Element {
    name: String,
    attrs: Vec<(String, String)>,
}

impl Element {
    fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }
}

fn handle_element(el: &Element, stack: &[String], info: &mut ManifestInfo) {
    let parent = stack.last().map(String::as_str);
    let name_attr = el.attr("name").filter(|v| !v.is_empty());
    match el.name.as_str() {
        "manifest" => info.package = el.attr("package").map(str::to_string),
        "uses-permission" | "uses-permission-sdk-23" | "uses-permission-sdk-m" => {
            if let Some(v) = name_attr {
                info.permissions.push(v.to_string());
            }
        }
        "uses-feature" => {
            if let Some(v) = name_attr {
                info.hardware_features.push(v.to_string());
            }
        }
        tag if COMPONENT_TAGS.contains(&tag) && parent == Some("application") => {
            if let Some(v) = name_attr {
                info.components.push(qualify(info.package.as_deref(), v));
            }
        }
        "action" | "category" if parent == Some("intent-filter") => {
            if let Some(v) = name_attr {
                info.intent_filters.push(v.to_string());
            }
        }
        _ => {}
    }
}

/// Expands `.Foo` and dot-less `Foo` component names against the package.
fn qualify(package: Option<&str>, name: &str) -> String {
    match package {
        Some(pkg) if name.starts_with('.') => format!("{pkg}{name}"),
        Some(pkg) if !name.contains('.') => format!("{pkg}.{name}"),
        _ => name.to_string(),
    }
}

fn string_at(strings: &[String], idx: u32) -> Option<&str> {
    strings.get(idx as usize).map(String::as_str)
}

fn parse_start_element(
    chunk: &[u8],
    hsize: usize,
    strings: &[String],
    resource_ids: &[u32],
) -> Result<Element, MalformedManifest> {
    if hsize != 16 {
        return Err(bad(2));
    }
    let ext = hsize;
    let name_idx = u32_le(chunk, ext + 4)?;
    let attr_start = u16_le(chunk, ext + 8)? as usize;
    let attr_size = u16_le(chunk, ext + 10)? as usize;
    let attr_count = u16_le(chunk, ext + 12)? as usize;
    let name = string_at(strings, name_idx)
        .ok_or(bad(ext + 4))?
        .to_string();
    if attr_size < 20 || attr_start < 20 {
        return Err(bad(ext + 8));
    }
    let first = ext + attr_start;
    if first + attr_count * attr_size != chunk.len() {
        return Err(bad(ext + 12));
    }
    let mut attrs = Vec::with_capacity(attr_count);
    for i in 0..attr_count {
        let a = first + i * attr_size;
        let aname_idx = u32_le(chunk, a + 4)?;
        let raw = u32_le(chunk, a + 8)?;
        let vsize = u16_le(chunk, a + 12)?;
        let vtype = u8_at(chunk, a + 15)?;
        let data = u32_le(chunk, a + 16)?;
        if vsize != 8 {
            return Err(bad(a + 12));
        }
        let aname = match resource_ids.get(aname_idx as usize) {
            Some(&ATTR_NAME) => "name".to_string(),
            _ => string_at(strings, aname_idx).ok_or(bad(a + 4))?.to_string(),
        };
        let value = if raw != NO_INDEX {
            string_at(strings, raw).ok_or(bad(a + 8))?.to_string()
        } else {
            match vtype {
                TYPE_STRING => string_at(strings, data).ok_or(bad(a + 16))?.to_string(),
                TYPE_REFERENCE => format!("@0x{data:08x}"),
                TYPE_INT_DEC => (data as i32).to_string(),
                TYPE_INT_BOOLEAN => (data != 0).to_string(),
                _ => format!("0x{data:08x}"),
            }
        };
        attrs.push((aname, value));
    }
    Ok(Element { name, attrs })
}

fn parse_string_pool(chunk: &[u8], hsize: usize) -> Result<Vec<String>, MalformedManifest> {
    if hsize != 28 {
        return Err(bad(2));
    }
    let count = u32_le(chunk, 8)? as usize;
    let flags = u32_le(chunk, 16)?;
    let strings_start = u32_le(chunk, 20)? as usize;
    if count > chunk.len() / 4 || strings_start > chunk.len() {
        return Err(bad(8));
    }
    let utf8 = flags & UTF8_FLAG != 0;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let rel = u32_le(chunk, hsize + 4 * i)? as usize;
        let off = strings_start.checked_add(rel).ok_or(bad(hsize + 4 * i))?;
        let s = if utf8 {
            utf8_string(chunk, off)?
        } else {
            utf16_string(chunk, off)?
        };
        out.push(s);
    }
    Ok(out)
}

fn utf16_string(chunk: &[u8], off: usize) -> Result<String, MalformedManifest> {
    let mut len = u16_le(chunk, off)? as usize;
    let mut p = off + 2;
    if len & 0x8000 != 0 {
        len = ((len & 0x7fff) << 16) | u16_le(chunk, p)? as usize;
        p += 2;
    }
    let raw = slice(chunk, p, len * 2)?;
    if u16_le(chunk, p + len * 2)? != 0 {
        return Err(bad(p + len * 2));
    }
    let units: Vec<u16> = raw
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    String::from_utf16(&units).map_err(|_| bad(off))
}

fn utf8_string(chunk: &[u8], off: usize) -> Result<String, MalformedManifest> {
    let mut p = off;
    let read_len = |p: &mut usize| -> Result<usize, MalformedManifest> {
        let b0 = u8_at(chunk, *p)? as usize;
        *p += 1;
        if b0 & 0x80 != 0 {
            let b1 = u8_at(chunk, *p)? as usize;
            *p += 1;
            Ok(((b0 & 0x7f) << 8) | b1)
        } else {
            Ok(b0)
        }
    };
    let _utf16_len = read_len(&mut p)?;
    let len = read_len(&mut p)?;
    let raw = slice(chunk, p, len)?;
    if u8_at(chunk, p + len)? != 0 {
        return Err(bad(p + len));
    }
    String::from_utf8(raw.to_vec()).map_err(|_| bad(off))
}

/// Element tree used to compile fixture manifests.
#[derive(Debug, Clone, Default)]
pub struct XmlElement {
    pub name: String,
    /// `(android namespace?, name, string value)`
    pub attrs: Vec<(bool, String, String)>,
    pub children: Vec<XmlElement>,
}

impl XmlElement {
    pub fn new(name: &str) -> Self {
        XmlElement {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn attr(mut self, android: bool, name: &str, value: &str) -> Self {
        self.attrs
            .push((android, name.to_string(), value.to_string()));
        self
    }

    pub fn child(mut self, c: XmlElement) -> Self {
        self.children.push(c);
        self
    }
}

/// Compiles an element tree into binary XML with a UTF-16 string pool and a
/// resource map that binds `android:name` to its framework id.
pub fn write_axml(root: &XmlElement) -> Vec<u8> {
    let mut pool = StringPool::default();
    // index 0 is reserved for the resource-mapped "name" attribute
    pool.intern("name");
    let ns_prefix = pool.intern("android");
    let ns_uri = pool.intern(ANDROID_NS);
    let mut body = Vec::new();
    push_node(&mut body, RES_XML_START_NAMESPACE, &[ns_prefix, ns_uri]);
    write_element(&mut body, root, &mut pool, ns_uri);
    push_node(&mut body, RES_XML_END_NAMESPACE, &[ns_prefix, ns_uri]);

    let pool_chunk = pool.encode();
    let mut resmap = Vec::new();
    resmap.extend_from_slice(&RES_XML_RESOURCE_MAP.to_le_bytes());
    resmap.extend_from_slice(&8u16.to_le_bytes());
    resmap.extend_from_slice(&12u32.to_le_bytes());
    resmap.extend_from_slice(&ATTR_NAME.to_le_bytes());

    let total = 8 + pool_chunk.len() + resmap.len() + body.len();
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&RES_XML.to_le_bytes());
    out.extend_from_slice(&8u16.to_le_bytes());
    out.extend_from_slice(&(total as u32).to_le_bytes());
    out.extend_from_slice(&pool_chunk);
    out.extend_from_slice(&resmap);
    out.extend_from_slice(&body);
    out
}

fn push_node(out: &mut Vec<u8>, kind: u16, ext: &[u32]) {
    out.extend_from_slice(&kind.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(&((16 + 4 * ext.len()) as u32).to_le_bytes());
    out.extend_from_slice(&1u32.to_le_bytes()); // line number
    out.extend_from_slice(&NO_INDEX.to_le_bytes()); // comment
    for v in ext {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn write_element(out: &mut Vec<u8>, el: &XmlElement, pool: &mut StringPool, ns_uri: u32) {
    let name = pool.intern(&el.name);
    let attr_count = el.attrs.len();
    let size = 16 + 20 + 20 * attr_count;
    out.extend_from_slice(&RES_XML_START_ELEMENT.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(&(size as u32).to_le_bytes());
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&NO_INDEX.to_le_bytes());
    out.extend_from_slice(&NO_INDEX.to_le_bytes()); // element ns
    out.extend_from_slice(&name.to_le_bytes());
    out.extend_from_slice(&20u16.to_le_bytes());
    out.extend_from_slice(&20u16.to_le_bytes());
    out.extend_from_slice(&(attr_count as u16).to_le_bytes());
    out.extend_from_slice(&[0u8; 6]);
    for (android, aname, value) in &el.attrs {
        let ns = if *android { ns_uri } else { NO_INDEX };
        let aname = if *android && aname == "name" {
            0
        } else {
            pool.intern(aname)
        };
        let v = pool.intern(value);
        out.extend_from_slice(&ns.to_le_bytes());
        out.extend_from_slice(&aname.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
        out.extend_from_slice(&8u16.to_le_bytes());
        out.push(0);
        out.push(TYPE_STRING);
        out.extend_from_slice(&v.to_le_bytes());
    }
    for c in &el.children {
        write_element(out, c, pool, ns_uri);
    }
    out.extend_from_slice(&RES_XML_END_ELEMENT.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(&24u32.to_le_bytes());
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&NO_INDEX.to_le_bytes());
    out.extend_from_slice(&NO_INDEX.to_le_bytes());
    out.extend_from_slice(&name.to_le_bytes());
}

#[derive(Default)]
struct StringPool {
    strings: Vec<String>,
}

impl StringPool {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(i) = self.strings.iter().position(|x| x == s) {
            return i as u32;
        }
        self.strings.push(s.to_string());
        (self.strings.len() - 1) as u32
    }

    fn encode(&self) -> Vec<u8> {
        let mut data = Vec::new();
        let mut offsets = Vec::new();
        for s in &self.strings {
            offsets.push(data.len() as u32);
            let units: Vec<u16> = s.encode_utf16().collect();
            assert!(units.len() < 0x8000, "fixture strings are short");
            data.extend_from_slice(&(units.len() as u16).to_le_bytes());
            for u in units {
                data.extend_from_slice(&u.to_le_bytes());
            }
            data.extend_from_slice(&0u16.to_le_bytes());
        }
        while data.len() % 4 != 0 {
            data.push(0);
        }
        let strings_start = 28 + 4 * self.strings.len();
        let size = strings_start + data.len();
        let mut out = Vec::with_capacity(size);
        out.extend_from_slice(&RES_STRING_POOL.to_le_bytes());
        out.extend_from_slice(&28u16.to_le_bytes());
        out.extend_from_slice(&(size as u32).to_le_bytes());
        out.extend_from_slice(&(self.strings.len() as u32).to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes()); // styles
        out.extend_from_slice(&0u32.to_le_bytes()); // flags: utf-16
        out.extend_from_slice(&(strings_start as u32).to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        for o in offsets {
            out.extend_from_slice(&o.to_le_bytes());
        }
        out.extend_from_slice(&data);
        out
    }
}
