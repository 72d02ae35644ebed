//! Dalvik primary opcode table.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Instruction encoding format, which fixes the instruction width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    F10x,
    F12x,
    F11n,
    F11x,
    F10t,
    F20t,
    F22x,
    F21t,
    F21s,
    F21h,
    F21c,
    F23x,
    F22b,
    F22t,
    F22s,
    F22c,
    F30t,
    F32x,
    F31i,
    F31t,
    F31c,
    F35c,
    F3rc,
    F45cc,
    F4rcc,
    F51l,
    Unused,
}

impl Format {
    /// Width in 16-bit code units.
    pub fn units(self) -> usize {
        use Format::*;
        match self {
            F10x | F12x | F11n | F11x | F10t => 1,
            F20t | F22x | F21t | F21s | F21h | F21c | F23x | F22b | F22t | F22s | F22c => 2,
            F30t | F32x | F31i | F31t | F31c | F35c | F3rc => 3,
            F45cc | F4rcc => 4,
            F51l => 5,
            Unused => 0,
        }
    }
}

/// Primary dex opcode byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Opcode(pub u8);

impl Opcode {
    pub const NOP: Opcode = Opcode(0x00);
    pub const RETURN_VOID: Opcode = Opcode(0x0e);
    pub const CONST_4: Opcode = Opcode(0x12);
    pub const CONST_STRING: Opcode = Opcode(0x1a);
    pub const INVOKE_VIRTUAL: Opcode = Opcode(0x6e);
    pub const INVOKE_STATIC: Opcode = Opcode(0x71);

    pub fn code(self) -> u8 {
        self.0
    }

    pub fn mnemonic(self) -> &'static str {
        TABLE[self.0 as usize].0
    }

    pub fn format(self) -> Format {
        TABLE[self.0 as usize].1
    }

    pub fn is_valid(self) -> bool {
        self.format() != Format::Unused
    }

    /// Invoke family whose operand is a `method_id` index.
    pub fn invokes_method(self) -> bool {
        matches!(self.0, 0x6e..=0x72 | 0x74..=0x78 | 0xfa | 0xfb)
    }

    pub fn from_mnemonic(m: &str) -> Option<Opcode> {
        TABLE
            .iter()
            .position(|(name, fmt)| *fmt != Format::Unused && *name == m)
            .map(|i| Opcode(i as u8))
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

use Format::*;

#[rustfmt::skip]
static TABLE: [(&str, Format); 256] = [
    // 0x00
    ("nop", F10x), ("move", F12x), ("move/from16", F22x), ("move/16", F32x),
    ("move-wide", F12x), ("move-wide/from16", F22x), ("move-wide/16", F32x), ("move-object", F12x),
    ("move-object/from16", F22x), ("move-object/16", F32x), ("move-result", F11x), ("move-result-wide", F11x),
    ("move-result-object", F11x), ("move-exception", F11x), ("return-void", F10x), ("return", F11x),
    // 0x10
    ("return-wide", F11x), ("return-object", F11x), ("const/4", F11n), ("const/16", F21s),
    ("const", F31i), ("const/high16", F21h), ("const-wide/16", F21s), ("const-wide/32", F31i),
    ("const-wide", F51l), ("const-wide/high16", F21h), ("const-string", F21c), ("const-string/jumbo", F31c),
    ("const-class", F21c), ("monitor-enter", F11x), ("monitor-exit", F11x), ("check-cast", F21c),
    // 0x20
    ("instance-of", F22c), ("array-length", F12x), ("new-instance", F21c), ("new-array", F22c),
    ("filled-new-array", F35c), ("filled-new-array/range", F3rc), ("fill-array-data", F31t), ("throw", F11x),
    ("goto", F10t), ("goto/16", F20t), ("goto/32", F30t), ("packed-switch", F31t),
    ("sparse-switch", F31t), ("cmpl-float", F23x), ("cmpg-float", F23x), ("cmpl-double", F23x),
    // 0x30
    ("cmpg-double", F23x), ("cmp-long", F23x), ("if-eq", F22t), ("if-ne", F22t),
    ("if-lt", F22t), ("if-ge", F22t), ("if-gt", F22t), ("if-le", F22t),
    ("if-eqz", F21t), ("if-nez", F21t), ("if-ltz", F21t), ("if-gez", F21t),
    ("if-gtz", F21t), ("if-lez", F21t), ("unused-3e", Unused), ("unused-3f", Unused),
    // 0x40
    ("unused-40", Unused), ("unused-41", Unused), ("unused-42", Unused), ("unused-43", Unused),
    ("aget", F23x), ("aget-wide", F23x), ("aget-object", F23x), ("aget-boolean", F23x),
    ("aget-byte", F23x), ("aget-char", F23x), ("aget-short", F23x), ("aput", F23x),
    ("aput-wide", F23x), ("aput-object", F23x), ("aput-boolean", F23x), ("aput-byte", F23x),
    // 0x50
    ("aput-char", F23x), ("aput-short", F23x), ("iget", F22c), ("iget-wide", F22c),
    ("iget-object", F22c), ("iget-boolean", F22c), ("iget-byte", F22c), ("iget-char", F22c),
    ("iget-short", F22c), ("iput", F22c), ("iput-wide", F22c), ("iput-object", F22c),
    ("iput-boolean", F22c), ("iput-byte", F22c), ("iput-char", F22c), ("iput-short", F22c),
    // 0x60
    ("sget", F21c), ("sget-wide", F21c), ("sget-object", F21c), ("sget-boolean", F21c),
    ("sget-byte", F21c), ("sget-char", F21c), ("sget-short", F21c), ("sput", F21c),
    ("sput-wide", F21c), ("sput-object", F21c), ("sput-boolean", F21c), ("sput-byte", F21c),
    ("sput-char", F21c), ("sput-short", F21c), ("invoke-virtual", F35c), ("invoke-super", F35c),
    // 0x70
    ("invoke-direct", F35c), ("invoke-static", F35c), ("invoke-interface", F35c), ("unused-73", Unused),
    ("invoke-virtual/range", F3rc), ("invoke-super/range", F3rc), ("invoke-direct/range", F3rc), ("invoke-static/range", F3rc),
    ("invoke-interface/range", F3rc), ("unused-79", Unused), ("unused-7a", Unused), ("neg-int", F12x),
    ("not-int", F12x), ("neg-long", F12x), ("not-long", F12x), ("neg-float", F12x),
    // 0x80
    ("neg-double", F12x), ("int-to-long", F12x), ("int-to-float", F12x), ("int-to-double", F12x),
    ("long-to-int", F12x), ("long-to-float", F12x), ("long-to-double", F12x), ("float-to-int", F12x),
    ("float-to-long", F12x), ("float-to-double", F12x), ("double-to-int", F12x), ("double-to-long", F12x),
    ("double-to-float", F12x), ("int-to-byte", F12x), ("int-to-char", F12x), ("int-to-short", F12x),
    // 0x90
    ("add-int", F23x), ("sub-int", F23x), ("mul-int", F23x), ("div-int", F23x),
    ("rem-int", F23x), ("and-int", F23x), ("or-int", F23x), ("xor-int", F23x),
    ("shl-int", F23x), ("shr-int", F23x), ("ushr-int", F23x), ("add-long", F23x),
    ("sub-long", F23x), ("mul-long", F23x), ("div-long", F23x), ("rem-long", F23x),
    // 0xa0
    ("and-long", F23x), ("or-long", F23x), ("xor-long", F23x), ("shl-long", F23x),
    ("shr-long", F23x), ("ushr-long", F23x), ("add-float", F23x), ("sub-float", F23x),
    ("mul-float", F23x), ("div-float", F23x), ("rem-float", F23x), ("add-double", F23x),
    ("sub-double", F23x), ("mul-double", F23x), ("div-double", F23x), ("rem-double", F23x),
    // 0xb0
    ("add-int/2addr", F12x), ("sub-int/2addr", F12x), ("mul-int/2addr", F12x), ("div-int/2addr", F12x),
    ("rem-int/2addr", F12x), ("and-int/2addr", F12x), ("or-int/2addr", F12x), ("xor-int/2addr", F12x),
    ("shl-int/2addr", F12x), ("shr-int/2addr", F12x), ("ushr-int/2addr", F12x), ("add-long/2addr", F12x),
    ("sub-long/2addr", F12x), ("mul-long/2addr", F12x), ("div-long/2addr", F12x), ("rem-long/2addr", F12x),
    // 0xc0
    ("and-long/2addr", F12x), ("or-long/2addr", F12x), ("xor-long/2addr", F12x), ("shl-long/2addr", F12x),
    ("shr-long/2addr", F12x), ("ushr-long/2addr", F12x), ("add-float/2addr", F12x), ("sub-float/2addr", F12x),
    ("mul-float/2addr", F12x), ("div-float/2addr", F12x), ("rem-float/2addr", F12x), ("add-double/2addr", F12x),
    ("sub-double/2addr", F12x), ("mul-double/2addr", F12x), ("div-double/2addr", F12x), ("rem-double/2addr", F12x),
    // 0xd0
    ("add-int/lit16", F22s), ("rsub-int", F22s), ("mul-int/lit16", F22s), ("div-int/lit16", F22s),
    ("rem-int/lit16", F22s), ("and-int/lit16", F22s), ("or-int/lit16", F22s), ("xor-int/lit16", F22s),
    ("add-int/lit8", F22b), ("rsub-int/lit8", F22b), ("mul-int/lit8", F22b), ("div-int/lit8", F22b),
    ("rem-int/lit8", F22b), ("and-int/lit8", F22b), ("or-int/lit8", F22b), ("xor-int/lit8", F22b),
    // 0xe0
    ("shl-int/lit8", F22b), ("shr-int/lit8", F22b), ("ushr-int/lit8", F22b), ("unused-e3", Unused),
    ("unused-e4", Unused), ("unused-e5", Unused), ("unused-e6", Unused), ("unused-e7", Unused),
    ("unused-e8", Unused), ("unused-e9", Unused), ("unused-ea", Unused), ("unused-eb", Unused),
    ("unused-ec", Unused), ("unused-ed", Unused), ("unused-ee", Unused), ("unused-ef", Unused),
    // 0xf0
    ("unused-f0", Unused), ("unused-f1", Unused), ("unused-f2", Unused), ("unused-f3", Unused),
    ("unused-f4", Unused), ("unused-f5", Unused), ("unused-f6", Unused), ("unused-f7", Unused),
    ("unused-f8", Unused), ("unused-f9", Unused), ("invoke-polymorphic", F45cc), ("invoke-polymorphic/range", F4rcc),
    ("invoke-custom", F35c), ("invoke-custom/range", F3rc), ("const-method-handle", F21c), ("const-method-type", F21c),
];
