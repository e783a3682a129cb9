//! Capability representation and the derivation rules shared by the
//! instruction-set simulator and the pipelined model.

use serde::{Deserialize, Serialize};

use crate::ir::{mask, Term};

/// Permission bits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Perms(pub u8);

impl Perms {
    pub const R: Perms = Perms(1);
    pub const W: Perms = Perms(1 << 1);
    pub const X: Perms = Perms(1 << 2);
    pub const LOAD_CAP: Perms = Perms(1 << 3);
    pub const STORE_CAP: Perms = Perms(1 << 4);
    pub const SEAL_ENTRY: Perms = Perms(1 << 5);
    pub const ALL: Perms = Perms(0x3f);
    pub const NONE: Perms = Perms(0);
    pub const WIDTH: u32 = 6;

    pub fn contains(self, other: Perms) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn intersect(self, other: Perms) -> Perms {
        Perms(self.0 & other.0)
    }
}

impl std::ops::BitOr for Perms {
    type Output = Perms;
    fn bitor(self, rhs: Perms) -> Perms {
        Perms(self.0 | rhs.0)
    }
}

/// Object type of an unsealed capability.
pub const OTYPE_UNSEALED: u8 = 0;
/// Object type of a sealed entry capability, unsealed by a jump through it.
pub const OTYPE_SENTRY: u8 = 1;
pub const OTYPE_WIDTH: u32 = 3;

/// Uncompressed capability. `top` is exclusive and one bit wider than an
/// address so that a capability can reach the end of the address space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Capability {
    pub tag: bool,
    pub perms: Perms,
    pub base: u64,
    pub top: u64,
    pub addr: u64,
    pub otype: u8,
}

impl Capability {
    /// Untagged value carrying only an integer in the address field.
    pub fn int(value: u64) -> Capability {
        Capability {
            addr: value,
            ..Capability::default()
        }
    }

    /// Full authority over an address space of `addr_w` bits.
    pub fn almighty(addr_w: u32) -> Capability {
        Capability {
            tag: true,
            perms: Perms::ALL,
            base: 0,
            top: 1 << addr_w,
            addr: 0,
            otype: OTYPE_UNSEALED,
        }
    }

    pub fn bounded(base: u64, top: u64, perms: Perms) -> Capability {
        Capability {
            tag: true,
            perms,
            base,
            top,
            addr: base,
            otype: OTYPE_UNSEALED,
        }
    }

    pub fn is_sealed(&self) -> bool {
        self.otype != OTYPE_UNSEALED
    }

    pub fn with_addr(mut self, addr: u64) -> Capability {
        self.addr = addr;
        self
    }

    /// True if a tagged, unsealed capability grants any authority over
    /// `a`, regardless of permissions.
    pub fn covers(&self, a: u64) -> bool {
        self.tag && !self.is_sealed() && self.base <= a && a < self.top
    }

    /// Two 32-bit memory words: `addr | base << A` and
    /// `top | perms << (A+1) | otype << (A+7)`.
    pub fn to_words(&self, addr_w: u32) -> (u64, u64) {
        let w0 = self.addr | (self.base << addr_w);
        let w1 = self.top
            | ((self.perms.0 as u64) << (addr_w + 1))
            | ((self.otype as u64) << (addr_w + 7));
        (w0 & mask(32), w1 & mask(32))
    }

    pub fn from_words(w0: u64, w1: u64, tag: bool, addr_w: u32) -> Capability {
        let am = mask(addr_w);
        Capability {
            tag,
            addr: w0 & am,
            base: (w0 >> addr_w) & am,
            top: w1 & mask(addr_w + 1),
            perms: Perms(((w1 >> (addr_w + 1)) & 0x3f) as u8),
            otype: ((w1 >> (addr_w + 7)) & 0x7) as u8,
        }
    }
}

/// Bounds and permission check for one access. The end address is
/// computed without wraparound.
/// Accesses that run past the end of the address space are denied.
pub fn check_access(c: &Capability, addr: u64, size: u64, need: Perms, addr_w: u32) -> bool {
    let end = addr + size;
    c.tag
        && !c.is_sealed()
        && c.perms.contains(need)
        && c.base <= addr
        && end <= c.top
        && end <= 1 << addr_w
}

/// Narrows bounds. Any attempt to widen, or to derive from a sealed
/// capability, clears the tag.
pub fn derive_set_bounds(c: &Capability, new_base: u64, new_top: u64) -> Capability {
    let ok =
        c.tag && !c.is_sealed() && new_base >= c.base && new_top <= c.top && new_base <= new_top;
    Capability {
        tag: ok,
        base: new_base,
        top: new_top,
        addr: c.addr.min(new_top).max(new_base),
        ..*c
    }
}

pub fn derive_and_perm(c: &Capability, m: Perms) -> Capability {
    Capability {
        tag: c.tag && !c.is_sealed(),
        perms: c.perms.intersect(m),
        ..*c
    }
}

/// Symbolic counterpart of [`Capability`] whose fields are terms.
#[derive(Clone, Debug)]
pub struct CapTerm {
    pub tag: Term,
    pub perms: Term,
    pub base: Term,
    pub top: Term,
    pub addr: Term,
    pub otype: Term,
}

pub const FIELDS: [&str; 6] = ["tag", "perms", "base", "top", "addr", "otype"];

impl CapTerm {
    pub fn constant(c: &Capability, addr_w: u32) -> CapTerm {
        CapTerm {
            tag: Term::bool(c.tag),
            perms: Term::bv(c.perms.0 as u64, Perms::WIDTH),
            base: Term::bv(c.base, addr_w),
            top: Term::bv(c.top, addr_w + 1),
            addr: Term::bv(c.addr, addr_w),
            otype: Term::bv(c.otype as u64, OTYPE_WIDTH),
        }
    }

    pub fn int(value: &Term) -> CapTerm {
        let aw = value.width();
        CapTerm {
            tag: Term::fals(),
            perms: Term::bv(0, Perms::WIDTH),
            base: Term::bv(0, aw),
            top: Term::bv(0, aw + 1),
            addr: value.clone(),
            otype: Term::bv(0, OTYPE_WIDTH),
        }
    }

    pub fn field(&self, name: &str) -> &Term {
        match name {
            "tag" => &self.tag,
            "perms" => &self.perms,
            "base" => &self.base,
            "top" => &self.top,
            "addr" => &self.addr,
            "otype" => &self.otype,
            _ => panic!("no capability field `{name}`"),
        }
    }

    pub fn fields(&self) -> [&Term; 6] {
        [
            &self.tag,
            &self.perms,
            &self.base,
            &self.top,
            &self.addr,
            &self.otype,
        ]
    }

    pub fn from_fields(f: [Term; 6]) -> CapTerm {
        let [tag, perms, base, top, addr, otype] = f;
        CapTerm {
            tag,
            perms,
            base,
            top,
            addr,
            otype,
        }
    }

    pub fn addr_w(&self) -> u32 {
        self.addr.width()
    }

    pub fn mux(c: &Term, t: &CapTerm, e: &CapTerm) -> CapTerm {
        CapTerm {
            tag: Term::ite(c, &t.tag, &e.tag),
            perms: Term::ite(c, &t.perms, &e.perms),
            base: Term::ite(c, &t.base, &e.base),
            top: Term::ite(c, &t.top, &e.top),
            addr: Term::ite(c, &t.addr, &e.addr),
            otype: Term::ite(c, &t.otype, &e.otype),
        }
    }

    pub fn unsealed(&self) -> Term {
        self.otype
            .equals(&Term::bv(OTYPE_UNSEALED as u64, OTYPE_WIDTH))
    }

    pub fn with_addr(&self, addr: &Term) -> CapTerm {
        CapTerm {
            addr: addr.clone(),
            ..self.clone()
        }
    }

    pub fn with_tag(&self, tag: &Term) -> CapTerm {
        CapTerm {
            tag: tag.clone(),
            ..self.clone()
        }
    }

    /// Tagged, unsealed and `base <= a < top`.
    pub fn covers(&self, a: &Term) -> Term {
        let aw = self.addr_w();
        let a1 = a.zext(aw + 1);
        self.tag
            .and(&self.unsealed())
            .and(&self.base.zext(aw + 1).ule(&a1))
            .and(&a1.ult(&self.top))
    }

    pub fn to_words(&self) -> (Term, Term) {
        let w0 = self.base.concat(&self.addr).zext(32);
        let w1 = self.otype.concat(&self.perms).concat(&self.top).zext(32);
        (w0, w1)
    }

    pub fn from_words(w0: &Term, w1: &Term, tag: &Term, addr_w: u32) -> CapTerm {
        CapTerm {
            tag: tag.clone(),
            addr: w0.extract(addr_w - 1, 0),
            base: w0.extract(2 * addr_w - 1, addr_w),
            top: w1.extract(addr_w, 0),
            perms: w1.extract(addr_w + 6, addr_w + 1),
            otype: w1.extract(addr_w + 9, addr_w + 7),
        }
    }
}

pub fn check_access_term(c: &CapTerm, addr: &Term, size: u64, need: Perms) -> Term {
    let aw = c.addr_w();
    let need_t = Term::bv(need.0 as u64, Perms::WIDTH);
    let end = addr.zext(aw + 1).add(&Term::bv(size, aw + 1));
    c.tag
        .and(&c.unsealed())
        .and(&c.perms.and(&need_t).equals(&need_t))
        .and(&c.base.ule(addr))
        .and(&end.ule(&c.top))
        .and(&end.ule(&Term::bv(1 << aw, aw + 1)))
}

pub fn derive_set_bounds_term(c: &CapTerm, new_base: &Term, new_top: &Term) -> CapTerm {
    let aw = c.addr_w();
    let nb1 = new_base.zext(aw + 1);
    let ok = c
        .tag
        .and(&c.unsealed())
        .and(&c.base.ule(new_base))
        .and(&new_top.ule(&c.top))
        .and(&nb1.ule(new_top));
    let a1 = c.addr.zext(aw + 1);
    let low = Term::ite(&new_top.ult(&a1), new_top, &a1);
    let clamped = Term::ite(&low.ult(&nb1), &nb1, &low).extract(aw - 1, 0);
    CapTerm {
        tag: ok,
        base: new_base.clone(),
        top: new_top.clone(),
        addr: clamped,
        ..c.clone()
    }
}

pub fn derive_and_perm_term(c: &CapTerm, m: &Term) -> CapTerm {
    CapTerm {
        tag: c.tag.and(&c.unsealed()),
        perms: c.perms.and(m),
        ..c.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cap(base: u64, top: u64, p: Perms) -> Capability {
        Capability::bounded(base, top, p)
    }

    #[test]
    fn access_inside_bounds() {
        assert!(check_access(
            &cap(0x100, 0x200, Perms::R),
            0x180,
            4,
            Perms::R,
            16
        ));
    }

    #[test]
    fn exclusive_top() {
        assert!(!check_access(
            &cap(0x100, 0x200, Perms::R),
            0x1fe,
            4,
            Perms::R,
            16
        ));
    }

    #[test]
    fn wrapping_access_denied() {
        let c = cap(0xfff0, 0x1_8000, Perms::W);
        assert!(check_access(&c, 0xfff8, 8, Perms::W, 16));
        assert!(!check_access(&c, 0xfffd, 8, Perms::W, 16));
    }

    #[test]
    fn untagged_denies() {
        let mut c = cap(0, 0x10000, Perms::ALL);
        c.tag = false;
        assert!(!check_access(&c, 0x10, 4, Perms::NONE, 16));
    }

    #[test]
    fn set_bounds_shrink_and_expand() {
        let c = cap(0x100, 0x200, Perms::R);
        assert!(derive_set_bounds(&c, 0x120, 0x180).tag);
        assert!(!derive_set_bounds(&c, 0x80, 0x200).tag);
        let mut s = c;
        s.otype = OTYPE_SENTRY;
        assert!(!derive_set_bounds(&s, 0x120, 0x180).tag);
    }

    #[test]
    fn and_perm_intersects() {
        let c = cap(0, 16, Perms::R | Perms::W);
        assert_eq!(derive_and_perm(&c, Perms::R).perms, Perms::R);
        let r = cap(0, 16, Perms::R);
        let d = derive_and_perm(&r, Perms::R | Perms::W);
        assert_eq!(d.perms, Perms::R);
        assert!(d.tag);
        let mut s = r;
        s.otype = 2;
        assert!(!derive_and_perm(&s, Perms::ALL).tag);
    }

    #[test]
    fn word_encoding_round_trips() {
        let c = Capability {
            tag: true,
            perms: Perms(0x2b),
            base: 0x1234,
            top: 0x1ffff,
            addr: 0xbeef,
            otype: 5,
        };
        let (w0, w1) = c.to_words(16);
        assert_eq!(Capability::from_words(w0, w1, true, 16), c);
    }
}
