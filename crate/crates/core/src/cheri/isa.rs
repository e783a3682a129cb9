//! Fixed 32-bit instruction encoding.
//!
//! | bits   | field                         |
//! |--------|-------------------------------|
//! | 1:0    | `11` (any other value traps)  |
//! | 5:2    | opcode                        |
//! | 8:6    | rd                            |
//! | 11:9   | rs1                           |
//! | 14:12  | rs2                           |
//! | 17:15  | funct                         |
//! | 31:18  | signed 14-bit immediate       |

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Alu,
    Load,
    Store,
    CLoadCap,
    CStoreCap,
    CSetBounds,
    CAndPerm,
    CIncAddr,
    CJalr,
    Branch,
    EcallRet,
}

impl Kind {
    pub const ALL: [Kind; 11] = [
        Kind::Alu,
        Kind::Load,
        Kind::Store,
        Kind::CLoadCap,
        Kind::CStoreCap,
        Kind::CSetBounds,
        Kind::CAndPerm,
        Kind::CIncAddr,
        Kind::CJalr,
        Kind::Branch,
        Kind::EcallRet,
    ];

    pub fn opcode(self) -> u32 {
        Kind::ALL.iter().position(|k| *k == self).unwrap() as u32
    }

    pub fn from_opcode(op: u32) -> Option<Kind> {
        Kind::ALL.get(op as usize).copied()
    }

    /// Number of valid funct values.
    pub fn funct_count(self) -> u8 {
        match self {
            Kind::Alu => 8,
            Kind::Branch => 2,
            Kind::EcallRet => 4,
            _ => 1,
        }
    }
}

pub mod alu {
    pub const ADD: u8 = 0;
    pub const SUB: u8 = 1;
    pub const AND: u8 = 2;
    pub const OR: u8 = 3;
    pub const XOR: u8 = 4;
    pub const SLTU: u8 = 5;
    pub const ADDI: u8 = 6;
    pub const LI: u8 = 7;
}

pub mod sys {
    pub const ECALL: u8 = 0;
    pub const MRET: u8 = 1;
    pub const CSPECIALR: u8 = 2;
    pub const CSPECIALW: u8 = 3;
}

pub const BEQ: u8 = 0;
pub const BNE: u8 = 1;

pub const IMM_BITS: u32 = 14;
pub const IMM_MIN: i32 = -(1 << (IMM_BITS - 1));
pub const IMM_MAX: i32 = (1 << (IMM_BITS - 1)) - 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instruction {
    pub kind: Kind,
    #[serde(default)]
    pub funct: u8,
    #[serde(default)]
    pub rd: u8,
    #[serde(default)]
    pub rs1: u8,
    #[serde(default)]
    pub rs2: u8,
    #[serde(default)]
    pub imm: i32,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("low bits {0:#b} are not 0b11")]
    BadMarker(u32),
    #[error("unknown opcode {0}")]
    BadOpcode(u32),
    #[error("funct {funct} invalid for {kind:?}")]
    BadFunct { kind: Kind, funct: u8 },
    #[error("register r{0} out of range")]
    BadRegister(u8),
    #[error("immediate {0} outside the signed 14-bit range")]
    BadImmediate(i32),
}

impl Instruction {
    pub fn new(kind: Kind, funct: u8, rd: u8, rs1: u8, rs2: u8, imm: i32) -> Instruction {
        Instruction {
            kind,
            funct,
            rd,
            rs1,
            rs2,
            imm,
        }
    }

    /// `BNE r0, r0`: never taken.
    pub fn nop() -> Instruction {
        Instruction::new(Kind::Branch, BNE, 0, 0, 0, 0)
    }

    pub fn li(rd: u8, imm: i32) -> Instruction {
        Instruction::new(Kind::Alu, alu::LI, rd, 0, 0, imm)
    }

    pub fn alu(funct: u8, rd: u8, rs1: u8, rs2: u8) -> Instruction {
        Instruction::new(Kind::Alu, funct, rd, rs1, rs2, 0)
    }

    pub fn addi(rd: u8, rs1: u8, imm: i32) -> Instruction {
        Instruction::new(Kind::Alu, alu::ADDI, rd, rs1, 0, imm)
    }

    pub fn load(rd: u8, rs1: u8, imm: i32) -> Instruction {
        Instruction::new(Kind::Load, 0, rd, rs1, 0, imm)
    }

    pub fn store(rs1: u8, rs2: u8, imm: i32) -> Instruction {
        Instruction::new(Kind::Store, 0, 0, rs1, rs2, imm)
    }

    pub fn cload(rd: u8, rs1: u8, imm: i32) -> Instruction {
        Instruction::new(Kind::CLoadCap, 0, rd, rs1, 0, imm)
    }

    pub fn cstore(rs1: u8, rs2: u8, imm: i32) -> Instruction {
        Instruction::new(Kind::CStoreCap, 0, 0, rs1, rs2, imm)
    }

    pub fn setbounds(rd: u8, rs1: u8, rs2: u8) -> Instruction {
        Instruction::new(Kind::CSetBounds, 0, rd, rs1, rs2, 0)
    }

    pub fn andperm(rd: u8, rs1: u8, rs2: u8) -> Instruction {
        Instruction::new(Kind::CAndPerm, 0, rd, rs1, rs2, 0)
    }

    pub fn incaddr(rd: u8, rs1: u8, imm: i32) -> Instruction {
        Instruction::new(Kind::CIncAddr, 0, rd, rs1, 0, imm)
    }

    pub fn jalr(rd: u8, rs1: u8) -> Instruction {
        Instruction::new(Kind::CJalr, 0, rd, rs1, 0, 0)
    }

    pub fn branch(funct: u8, rs1: u8, rs2: u8, imm: i32) -> Instruction {
        Instruction::new(Kind::Branch, funct, 0, rs1, rs2, imm)
    }

    pub fn sys(funct: u8, rd: u8, rs1: u8, imm: i32) -> Instruction {
        Instruction::new(Kind::EcallRet, funct, rd, rs1, 0, imm)
    }

    pub fn validate(&self, num_regs: u8) -> Result<(), DecodeError> {
        if self.funct >= self.kind.funct_count() {
            return Err(DecodeError::BadFunct {
                kind: self.kind,
                funct: self.funct,
            });
        }
        for r in [self.rd, self.rs1, self.rs2] {
            if r >= num_regs {
                return Err(DecodeError::BadRegister(r));
            }
        }
        if !(IMM_MIN..=IMM_MAX).contains(&self.imm) {
            return Err(DecodeError::BadImmediate(self.imm));
        }
        Ok(())
    }

    pub fn encode(&self) -> u32 {
        0b11 | (self.kind.opcode() << 2)
            | ((self.rd as u32 & 7) << 6)
            | ((self.rs1 as u32 & 7) << 9)
            | ((self.rs2 as u32 & 7) << 12)
            | ((self.funct as u32 & 7) << 15)
            | (((self.imm as u32) & 0x3fff) << 18)
    }

    pub fn decode(word: u32, num_regs: u8) -> Result<Instruction, DecodeError> {
        if word & 0b11 != 0b11 {
            return Err(DecodeError::BadMarker(word & 0b11));
        }
        let op = (word >> 2) & 0xf;
        let kind = Kind::from_opcode(op).ok_or(DecodeError::BadOpcode(op))?;
        let field = |lo: u32| ((word >> lo) & 7) as u8;
        let imm = (word as i32) >> 18;
        let i = Instruction {
            kind,
            rd: field(6),
            rs1: field(9),
            rs2: field(12),
            funct: field(15),
            imm,
        };
        i.validate(num_regs)?;
        Ok(i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode_round_trip() {
        let cases = [
            Instruction::nop(),
            Instruction::li(3, -5),
            Instruction::cstore(1, 2, IMM_MAX),
            Instruction::load(7, 6, IMM_MIN),
            Instruction::sys(sys::CSPECIALW, 0, 4, 1),
        ];
        for i in cases {
            assert_eq!(Instruction::decode(i.encode(), 8).unwrap(), i);
        }
    }

    #[test]
    fn illegal_words() {
        assert!(matches!(
            Instruction::decode(0, 8),
            Err(DecodeError::BadMarker(0))
        ));
        assert!(matches!(
            Instruction::decode(0b11 | (15 << 2), 8),
            Err(DecodeError::BadOpcode(15))
        ));
        let w = Instruction::li(5, 0).encode();
        assert_eq!(Instruction::decode(w, 4), Err(DecodeError::BadRegister(5)));
    }
}
