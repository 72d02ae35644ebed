//! Dalvik executable parsing: string pool, method ids, class data and
//! bytecode walking.

use std::collections::BTreeSet;

use sha1::{Digest, Sha1};
use thiserror::Error;

use super::method::{descriptor_to_java, MethodRef};
use super::opcodes::Opcode;
use crate::bytes::{slice, u16_le, u32_le, u8_at, uleb128, write_uleb128, OutOfBounds};

const HEADER_SIZE: usize = 0x70;
const ENDIAN_CONSTANT: u32 = 0x1234_5678;
const NO_INDEX: u32 = 0xffff_ffff;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed dex at offset {offset}")]
pub struct MalformedDex {
    pub offset: usize,
}

impl From<OutOfBounds> for MalformedDex {
    fn from(e: OutOfBounds) -> Self {
        MalformedDex { offset: e.0 }
    }
}

fn bad(offset: usize) -> MalformedDex {
    MalformedDex { offset }
}

/// Bytecode of one method with a code item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodCode {
    pub method_idx: u32,
    /// Real instructions only; switch and array payloads are skipped.
    pub opcodes: Vec<Opcode>,
    /// `method_id` operands of invoke instructions, in bytecode order.
    pub invokes: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct DexFile {
    pub strings: Vec<String>,
    pub methods: Vec<MethodRef>,
    /// Methods with code, in class-def then class-data order.
    pub code: Vec<MethodCode>,
}

impl DexFile {
    pub fn parse(buf: &[u8]) -> Result<DexFile, MalformedDex> {
        if buf.len() < HEADER_SIZE {
            return Err(bad(0));
        }
        let magic = &buf[0..8];
        if &magic[0..4] != b"dex\n" || !magic[4..7].iter().all(u8::is_ascii_digit) || magic[7] != 0
        {
            return Err(bad(0));
        }
        if u32_le(buf, 8)? != adler32(&buf[12..]) {
            return Err(bad(8));
        }
        if u32_le(buf, 32)? as usize != buf.len() {
            return Err(bad(32));
        }
        if u32_le(buf, 36)? as usize != HEADER_SIZE {
            return Err(bad(36));
        }
        if u32_le(buf, 40)? != ENDIAN_CONSTANT {
            return Err(bad(40));
        }

        let table = |size_at: usize, item: usize| -> Result<(usize, usize), MalformedDex> {
            let n = u32_le(buf, size_at)? as usize;
            let off = u32_le(buf, size_at + 4)? as usize;
            let bytes = n.checked_mul(item).ok_or(bad(size_at))?;
            if n > 0 && (off < HEADER_SIZE || slice(buf, off, bytes).is_err()) {
                return Err(bad(size_at + 4));
            }
            Ok((n, off))
        };
        let (n_strings, strings_off) = table(56, 4)?;
        let (n_types, types_off) = table(64, 4)?;
        let (n_protos, protos_off) = table(72, 12)?;
        let (n_methods, methods_off) = table(88, 8)?;
        let (n_classes, classes_off) = table(96, 32)?;

        let mut strings = Vec::with_capacity(n_strings);
        for i in 0..n_strings {
            let data_off = u32_le(buf, strings_off + 4 * i)? as usize;
            strings.push(read_mutf8(buf, data_off)?);
        }

        let mut types = Vec::with_capacity(n_types);
        for i in 0..n_types {
            let at = types_off + 4 * i;
            let idx = u32_le(buf, at)? as usize;
            types.push(strings.get(idx).ok_or(bad(at))?.as_str());
        }

        let mut protos = Vec::with_capacity(n_protos);
        for i in 0..n_protos {
            let at = protos_off + 12 * i;
            let ret = u32_le(buf, at + 4)? as usize;
            let params_off = u32_le(buf, at + 8)? as usize;
            let mut desc = String::from("(");
            if params_off != 0 {
                let n = u32_le(buf, params_off)? as usize;
                for p in 0..n {
                    let ty = u16_le(buf, params_off + 4 + 2 * p)? as usize;
                    desc.push_str(types.get(ty).ok_or(bad(params_off + 4 + 2 * p))?);
                }
            }
            desc.push(')');
            desc.push_str(types.get(ret).ok_or(bad(at + 4))?);
            protos.push(desc);
        }

        let mut methods = Vec::with_capacity(n_methods);
        for i in 0..n_methods {
            let at = methods_off + 8 * i;
            let class = u16_le(buf, at)? as usize;
            let proto = u16_le(buf, at + 2)? as usize;
            let name = u32_le(buf, at + 4)? as usize;
            let class = types.get(class).ok_or(bad(at))?;
            let proto = protos.get(proto).ok_or(bad(at + 2))?;
            let name = strings.get(name).ok_or(bad(at + 4))?;
            methods.push(MethodRef::new(&descriptor_to_java(class), name, proto));
        }

        let mut code = Vec::new();
        for i in 0..n_classes {
            let at = classes_off + 32 * i;
            if u32_le(buf, at)? as usize >= n_types {
                return Err(bad(at));
            }
            let data_off = u32_le(buf, at + 24)? as usize;
            if data_off != 0 {
                read_class_data(buf, data_off, n_methods, &mut code)?;
            }
        }
        Ok(DexFile {
            strings,
            methods,
            code,
        })
    }

    pub fn instruction_count(&self) -> usize {
        self.code.iter().map(|m| m.opcodes.len()).sum()
    }
}

fn read_class_data(
    buf: &[u8],
    off: usize,
    n_methods: usize,
    code: &mut Vec<MethodCode>,
) -> Result<(), MalformedDex> {
    let (n_static, p) = uleb128(buf, off)?;
    let (n_instance, p) = uleb128(buf, p)?;
    let (n_direct, p) = uleb128(buf, p)?;
    let (n_virtual, mut p) = uleb128(buf, p)?;
    for _ in 0..(n_static as u64 + n_instance as u64) {
        p = uleb128(buf, p)?.1;
        p = uleb128(buf, p)?.1;
    }
    for count in [n_direct, n_virtual] {
        let mut idx: u64 = 0;
        for _ in 0..count {
            let at = p;
            let (diff, q) = uleb128(buf, p)?;
            let (_flags, q) = uleb128(buf, q)?;
            let (code_off, q) = uleb128(buf, q)?;
            p = q;
            idx += diff as u64;
            if idx >= n_methods as u64 {
                return Err(bad(at));
            }
            if code_off != 0 {
                code.push(read_code(buf, code_off as usize, idx as u32, n_methods)?);
            }
        }
    }
    Ok(())
}

fn read_code(
    buf: &[u8],
    off: usize,
    method_idx: u32,
    n_methods: usize,
) -> Result<MethodCode, MalformedDex> {
    let n_units = u32_le(buf, off + 12)? as usize;
    let insns_off = off + 16;
    let raw = slice(buf, insns_off, n_units.checked_mul(2).ok_or(bad(off + 12))?)?;
    let units: Vec<u16> = raw
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    let mut opcodes = Vec::new();
    let mut invokes = Vec::new();
    let mut pc = 0usize;
    while pc < units.len() {
        let at = insns_off + 2 * pc;
        let unit = units[pc];
        let op = Opcode((unit & 0xff) as u8);
        if op == Opcode::NOP && unit >> 8 != 0 {
            pc += payload_units(&units, pc).ok_or(bad(at))?;
            continue;
        }
        if !op.is_valid() {
            return Err(bad(at));
        }
        let width = op.format().units();
        if pc + width > units.len() {
            return Err(bad(at));
        }
        if op.invokes_method() {
            let target = units[pc + 1] as u32;
            if target as usize >= n_methods {
                return Err(bad(at + 2));
            }
            invokes.push(target);
        }
        opcodes.push(op);
        pc += width;
    }
    Ok(MethodCode {
        method_idx,
        opcodes,
        invokes,
    })
}

/// Width of the switch / array-data payload starting at `pc`.
fn payload_units(units: &[u16], pc: usize) -> Option<usize> {
    let get = |i: usize| units.get(pc + i).copied().map(usize::from);
    let width = match units[pc] {
        0x0100 => get(1)? * 2 + 4,
        0x0200 => get(1)? * 4 + 2,
        0x0300 => {
            let elem = get(1)?;
            let size = get(2)? | (get(3)? << 16);
            elem.checked_mul(size)?.div_ceil(2) + 4
        }
        _ => return None,
    };
    (pc + width <= units.len()).then_some(width)
}

fn read_mutf8(buf: &[u8], off: usize) -> Result<String, MalformedDex> {
    let (utf16_len, mut p) = uleb128(buf, off)?;
    let mut units: Vec<u16> = Vec::with_capacity(utf16_len as usize);
    loop {
        let b = u8_at(buf, p)?;
        p += 1;
        let unit = match b {
            0 => break,
            0x01..=0x7f => b as u16,
            0xc0..=0xdf => {
                let b2 = u8_at(buf, p)?;
                p += 1;
                if b2 & 0xc0 != 0x80 {
                    return Err(bad(p - 1));
                }
                ((b as u16 & 0x1f) << 6) | (b2 as u16 & 0x3f)
            }
            0xe0..=0xef => {
                let b2 = u8_at(buf, p)?;
                let b3 = u8_at(buf, p + 1)?;
                p += 2;
                if b2 & 0xc0 != 0x80 || b3 & 0xc0 != 0x80 {
                    return Err(bad(p - 2));
                }
                ((b as u16 & 0x0f) << 12) | ((b2 as u16 & 0x3f) << 6) | (b3 as u16 & 0x3f)
            }
            _ => return Err(bad(p - 1)),
        };
        units.push(unit);
    }
    if units.len() != utf16_len as usize {
        return Err(bad(off));
    }
    Ok(String::from_utf16_lossy(&units))
}

pub(crate) fn adler32(data: &[u8]) -> u32 {
    let mut h = adler2::Adler32::new();
    h.write_slice(data);
    h.checksum()
}

// ---------------------------------------------------------------------------
// Writer

/// A bytecode instruction accepted by [`DexBuilder`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Insn {
    Nop,
    Const4 {
        reg: u8,
        value: i8,
    },
    ReturnVoid,
    ConstString {
        reg: u8,
        value: String,
    },
    /// `invoke-static {}` on the given method.
    InvokeStatic(MethodRef),
    /// `invoke-virtual {v0}` on the given method.
    InvokeVirtual(MethodRef),
    /// A packed-switch payload with `n` targets; not an instruction.
    PackedSwitchPayload(u16),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodDef {
    pub name: String,
    pub body: Vec<Insn>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDef {
    /// Dotted class name.
    pub name: String,
    /// Methods; all are emitted as `public static ()V` with the given
    /// bodies. Declaration order follows method-id order, i.e. by name.
    pub methods: Vec<MethodDef>,
}

/// Assembles a single well-formed dex file with valid checksum, sorted
/// id tables and a map list.
#[derive(Debug, Default)]
pub struct DexBuilder {
    classes: Vec<ClassDef>,
    extra_strings: BTreeSet<String>,
}

struct Pools {
    strings: Vec<String>,
    types: Vec<String>,
    protos: Vec<(String, Vec<String>)>,
    methods: Vec<(String, String, (String, Vec<String>))>,
}

impl Pools {
    fn string(&self, s: &str) -> u32 {
        self.strings
            .binary_search_by(|x| mutf8_cmp(x, s))
            .expect("interned") as u32
    }
    fn ty(&self, s: &str) -> u32 {
        let si = self.string(s);
        self.types
            .iter()
            .position(|t| self.string(t) == si)
            .expect("interned") as u32
    }
    fn proto(&self, p: &(String, Vec<String>)) -> u32 {
        self.protos.iter().position(|x| x == p).expect("interned") as u32
    }
    fn method(&self, m: &MethodRef) -> u32 {
        let key = method_key(m);
        self.methods
            .iter()
            .position(|x| *x == key)
            .expect("interned") as u32
    }
}

fn mutf8_cmp(a: &str, b: &str) -> std::cmp::Ordering {
    a.encode_utf16().cmp(b.encode_utf16())
}

fn split_proto(desc: &str) -> (String, Vec<String>) {
    let close = desc.find(')').expect("proto has ')'");
    let mut params = Vec::new();
    let inner = &desc.as_bytes()[1..close];
    let mut i = 0;
    while i < inner.len() {
        let start = i;
        while inner[i] == b'[' {
            i += 1;
        }
        if inner[i] == b'L' {
            while inner[i] != b';' {
                i += 1;
            }
        }
        i += 1;
        params.push(String::from_utf8(inner[start..i].to_vec()).expect("ascii"));
    }
    (desc[close + 1..].to_string(), params)
}

fn method_key(m: &MethodRef) -> (String, String, (String, Vec<String>)) {
    (
        super::method::java_to_descriptor(&m.class_name),
        m.method_name.clone(),
        split_proto(&m.descriptor),
    )
}

fn shorty(ret: &str, params: &[String]) -> String {
    let c = |t: &str| match t.as_bytes()[0] {
        b'L' | b'[' => 'L',
        x => x as char,
    };
    std::iter::once(c(ret))
        .chain(params.iter().map(|p| c(p)))
        .collect()
}

impl DexBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn class(&mut self, class: ClassDef) -> &mut Self {
        self.classes.push(class);
        self
    }

    /// Adds a string to the pool without referencing it from code.
    pub fn string(&mut self, s: &str) -> &mut Self {
        self.extra_strings.insert(s.to_string());
        self
    }

    fn own_method(class: &ClassDef, m: &MethodDef) -> MethodRef {
        MethodRef::new(&class.name, &m.name, "()V")
    }

    fn pools(&self) -> Pools {
        let mut method_refs: BTreeSet<_> = BTreeSet::new();
        let mut strings: BTreeSet<String> = self.extra_strings.clone();
        let mut types: BTreeSet<String> = BTreeSet::new();
        types.insert("Ljava/lang/Object;".into());
        for c in &self.classes {
            types.insert(super::method::java_to_descriptor(&c.name));
            for m in &c.methods {
                method_refs.insert(method_key(&Self::own_method(c, m)));
                for insn in &m.body {
                    match insn {
                        Insn::InvokeStatic(r) | Insn::InvokeVirtual(r) => {
                            method_refs.insert(method_key(r));
                        }
                        Insn::ConstString { value, .. } => {
                            strings.insert(value.clone());
                        }
                        _ => {}
                    }
                }
            }
        }
        let mut protos: BTreeSet<(String, Vec<String>)> = BTreeSet::new();
        for (class, name, proto) in &method_refs {
            types.insert(class.clone());
            types.insert(proto.0.clone());
            types.extend(proto.1.iter().cloned());
            strings.insert(name.clone());
            protos.insert(proto.clone());
        }
        for (ret, params) in &protos {
            strings.insert(shorty(ret, params));
        }
        strings.extend(types.iter().cloned());
        let mut strings: Vec<String> = strings.into_iter().collect();
        strings.sort_by(|a, b| mutf8_cmp(a, b));
        let mut pools = Pools {
            strings,
            types: Vec::new(),
            protos: Vec::new(),
            methods: Vec::new(),
        };
        let mut types: Vec<String> = types.into_iter().collect();
        types.sort_by_key(|t| pools.string(t));
        pools.types = types;
        let mut protos: Vec<_> = protos.into_iter().collect();
        protos.sort_by_key(|(ret, params)| {
            (
                pools.ty(ret),
                params.iter().map(|p| pools.ty(p)).collect::<Vec<_>>(),
            )
        });
        pools.protos = protos;
        let mut methods: Vec<_> = method_refs.into_iter().collect();
        methods.sort_by_key(|(c, n, p)| (pools.ty(c), pools.string(n), pools.proto(p)));
        pools.methods = methods;
        pools
    }

    pub fn build(&self) -> Vec<u8> {
        let pools = self.pools();
        let n_str = pools.strings.len();
        let n_ty = pools.types.len();
        let n_pr = pools.protos.len();
        let n_me = pools.methods.len();
        let n_cl = self.classes.len();

        let strings_off = HEADER_SIZE;
        let types_off = strings_off + 4 * n_str;
        let protos_off = types_off + 4 * n_ty;
        let methods_off = protos_off + 12 * n_pr;
        let classes_off = methods_off + 8 * n_me;
        let data_off = classes_off + 32 * n_cl;

        let mut data: Vec<u8> = Vec::new();
        let align4 = |d: &mut Vec<u8>| {
            while !(data_off + d.len()).is_multiple_of(4) {
                d.push(0);
            }
        };

        // type lists
        let mut proto_params_off = vec![0u32; n_pr];
        let type_lists_off = data_off + data.len();
        let mut n_type_lists = 0;
        for (i, (_, params)) in pools.protos.iter().enumerate() {
            if params.is_empty() {
                continue;
            }
            align4(&mut data);
            proto_params_off[i] = (data_off + data.len()) as u32;
            data.extend_from_slice(&(params.len() as u32).to_le_bytes());
            for p in params {
                data.extend_from_slice(&(pools.ty(p) as u16).to_le_bytes());
            }
            n_type_lists += 1;
        }

        // code items
        align4(&mut data);
        let code_items_off = data_off + data.len();
        let mut code_offs: Vec<Vec<(u32, u32)>> = Vec::new();
        let mut n_code = 0;
        for c in &self.classes {
            let mut per_class: Vec<(u32, u32)> = c
                .methods
                .iter()
                .map(|m| (pools.method(&Self::own_method(c, m)), 0))
                .collect();
            let mut order: Vec<usize> = (0..c.methods.len()).collect();
            order.sort_by_key(|&i| per_class[i].0);
            for i in order {
                align4(&mut data);
                per_class[i].1 = (data_off + data.len()) as u32;
                let units = encode_body(&c.methods[i].body, &pools);
                data.extend_from_slice(&1u16.to_le_bytes()); // registers
                data.extend_from_slice(&0u16.to_le_bytes()); // ins
                data.extend_from_slice(&0u16.to_le_bytes()); // outs
                data.extend_from_slice(&0u16.to_le_bytes()); // tries
                data.extend_from_slice(&0u32.to_le_bytes()); // debug info
                data.extend_from_slice(&(units.len() as u32).to_le_bytes());
                for u in units {
                    data.extend_from_slice(&u.to_le_bytes());
                }
                n_code += 1;
            }
            per_class.sort();
            code_offs.push(per_class);
        }

        // class data
        let class_data_off = data_off + data.len();
        let mut class_data_offs = Vec::new();
        for methods in &code_offs {
            if methods.is_empty() {
                class_data_offs.push(0u32);
                continue;
            }
            class_data_offs.push((data_off + data.len()) as u32);
            write_uleb128(&mut data, 0);
            write_uleb128(&mut data, 0);
            write_uleb128(&mut data, methods.len() as u32);
            write_uleb128(&mut data, 0);
            let mut prev = 0;
            for (idx, off) in methods {
                write_uleb128(&mut data, idx - prev);
                write_uleb128(&mut data, 0x0009); // public static
                write_uleb128(&mut data, *off);
                prev = *idx;
            }
        }
        let n_class_data = class_data_offs.iter().filter(|o| **o != 0).count();

        // string data
        let string_data_off = data_off + data.len();
        let mut string_offs = Vec::new();
        for s in &pools.strings {
            string_offs.push((data_off + data.len()) as u32);
            let units: Vec<u16> = s.encode_utf16().collect();
            write_uleb128(&mut data, units.len() as u32);
            for u in units {
                encode_mutf8_unit(&mut data, u);
            }
            data.push(0);
        }

        // map list
        align4(&mut data);
        let map_off = data_off + data.len();
        let mut map: Vec<(u16, u32, usize)> = vec![
            (0x0000, 1, 0),
            (0x0001, n_str as u32, strings_off),
            (0x0002, n_ty as u32, types_off),
            (0x0003, n_pr as u32, protos_off),
            (0x0005, n_me as u32, methods_off),
            (0x0006, n_cl as u32, classes_off),
            (0x1001, n_type_lists, type_lists_off),
            (0x2001, n_code, code_items_off),
            (0x2000, n_class_data as u32, class_data_off),
            (0x2002, n_str as u32, string_data_off),
            (0x1000, 1, map_off),
        ];
        map.retain(|(_, n, _)| *n > 0);
        data.extend_from_slice(&(map.len() as u32).to_le_bytes());
        for (ty, n, off) in &map {
            data.extend_from_slice(&ty.to_le_bytes());
            data.extend_from_slice(&0u16.to_le_bytes());
            data.extend_from_slice(&n.to_le_bytes());
            data.extend_from_slice(&(*off as u32).to_le_bytes());
        }

        let file_size = data_off + data.len();
        let mut out = Vec::with_capacity(file_size);
        out.extend_from_slice(b"dex\n035\0");
        out.extend_from_slice(&[0u8; 4]); // checksum
        out.extend_from_slice(&[0u8; 20]); // signature
        out.extend_from_slice(&(file_size as u32).to_le_bytes());
        out.extend_from_slice(&(HEADER_SIZE as u32).to_le_bytes());
        out.extend_from_slice(&ENDIAN_CONSTANT.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes()); // link size
        out.extend_from_slice(&0u32.to_le_bytes()); // link off
        out.extend_from_slice(&(map_off as u32).to_le_bytes());
        let table = |out: &mut Vec<u8>, n: usize, off: usize| {
            out.extend_from_slice(&(n as u32).to_le_bytes());
            out.extend_from_slice(&(if n == 0 { 0 } else { off as u32 }).to_le_bytes());
        };
        table(&mut out, n_str, strings_off);
        table(&mut out, n_ty, types_off);
        table(&mut out, n_pr, protos_off);
        table(&mut out, 0, 0); // fields
        table(&mut out, n_me, methods_off);
        table(&mut out, n_cl, classes_off);
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(&(data_off as u32).to_le_bytes());
        debug_assert_eq!(out.len(), HEADER_SIZE);

        for o in &string_offs {
            out.extend_from_slice(&o.to_le_bytes());
        }
        for t in &pools.types {
            out.extend_from_slice(&pools.string(t).to_le_bytes());
        }
        for (i, (ret, params)) in pools.protos.iter().enumerate() {
            out.extend_from_slice(&pools.string(&shorty(ret, params)).to_le_bytes());
            out.extend_from_slice(&pools.ty(ret).to_le_bytes());
            out.extend_from_slice(&proto_params_off[i].to_le_bytes());
        }
        for (class, name, proto) in &pools.methods {
            out.extend_from_slice(&(pools.ty(class) as u16).to_le_bytes());
            out.extend_from_slice(&(pools.proto(proto) as u16).to_le_bytes());
            out.extend_from_slice(&pools.string(name).to_le_bytes());
        }
        for (c, cd_off) in self.classes.iter().zip(&class_data_offs) {
            out.extend_from_slice(
                &pools
                    .ty(&super::method::java_to_descriptor(&c.name))
                    .to_le_bytes(),
            );
            out.extend_from_slice(&0x0001u32.to_le_bytes());
            out.extend_from_slice(&pools.ty("Ljava/lang/Object;").to_le_bytes());
            out.extend_from_slice(&0u32.to_le_bytes()); // interfaces
            out.extend_from_slice(&NO_INDEX.to_le_bytes()); // source file
            out.extend_from_slice(&0u32.to_le_bytes()); // annotations
            out.extend_from_slice(&cd_off.to_le_bytes());
            out.extend_from_slice(&0u32.to_le_bytes()); // static values
        }
        out.extend_from_slice(&data);
        debug_assert_eq!(out.len(), file_size);

        let sig = Sha1::digest(&out[32..]);
        out[12..32].copy_from_slice(&sig);
        let checksum = adler32(&out[12..]);
        out[8..12].copy_from_slice(&checksum.to_le_bytes());
        out
    }
}

fn encode_mutf8_unit(out: &mut Vec<u8>, u: u16) {
    match u {
        0x0001..=0x007f => out.push(u as u8),
        0x0000 | 0x0080..=0x07ff => {
            out.push(0xc0 | ((u >> 6) as u8 & 0x1f));
            out.push(0x80 | (u as u8 & 0x3f));
        }
        _ => {
            out.push(0xe0 | ((u >> 12) as u8 & 0x0f));
            out.push(0x80 | ((u >> 6) as u8 & 0x3f));
            out.push(0x80 | (u as u8 & 0x3f));
        }
    }
}

fn encode_body(body: &[Insn], pools: &Pools) -> Vec<u16> {
    let mut units = Vec::new();
    for insn in body {
        match insn {
            Insn::Nop => units.push(0x0000),
            Insn::Const4 { reg, value } => units
                .push((((*value as u8 & 0x0f) as u16) << 12) | ((*reg as u16 & 0x0f) << 8) | 0x12),
            Insn::ReturnVoid => units.push(0x000e),
            Insn::ConstString { reg, value } => {
                units.push(((*reg as u16) << 8) | 0x1a);
                units.push(pools.string(value) as u16);
            }
            Insn::InvokeStatic(m) => {
                units.extend_from_slice(&[0x0071, pools.method(m) as u16, 0]);
            }
            Insn::InvokeVirtual(m) => {
                units.extend_from_slice(&[0x106e, pools.method(m) as u16, 0]);
            }
            Insn::PackedSwitchPayload(n) => {
                // payloads must be 4-byte aligned relative to the code start
                if units.len() % 2 == 1 {
                    units.push(0x0000);
                }
                units.extend_from_slice(&[0x0100, *n, 0, 0]);
                units.extend(std::iter::repeat_n(0, 2 * *n as usize));
            }
        }
    }
    units
}
