//! Map descriptors: the top-K parts of a map, each packed into 42 bits.
//!
//! Bit layout of one part, most significant first, 7 bits per field:
//! `x_begin, x_end, y_begin, y_end` of the keypoint box in steps of
//! `local_resolution` from `local_origin`, then the descriptor box origin as a
//! cell index on a 128 × 128 lattice spanning the dictionary extent. The
//! descriptor box end is not stored; it is rebuilt from the keypoint box shape.
//!
//! File layout (little-endian):
//!
//! ```text
//! "PSLM" | version u8 | map_id (u16 len + UTF-8) | dictionary_id (u16 len + UTF-8)
//! local_origin 2×f64 | local_resolution f64 | dict_extent 4×f64 (x_begin, x_end, y_begin, y_end)
//! K u16 | ceil(42·K / 8) payload bytes | score flag u8 | K score bytes if flag = 1
//! ```

use std::path::Path;

use crate::cpd::{discover_parts_in, part_order, CpdConfig, Dictionary, Part};
use crate::error::{Error, Result};
use crate::geometry::{BBox, Point2, PointSetMap};
use crate::scalar::Real;

pub const PART_BITS: usize = 42;
pub const FIELD_BITS: u32 = 7;
const FIELD_MAX: u64 = (1 << FIELD_BITS) - 1;
/// Cells per axis of the descriptor-origin lattice.
pub const LATTICE_CELLS: u32 = 1 << FIELD_BITS;
pub const MAGIC: &[u8; 4] = b"PSLM";
pub const FORMAT_VERSION: u8 = 1;
/// Keypoint quantization step used for every descriptor this crate builds.
pub const LOCAL_RESOLUTION: f64 = 0.1;

/// Everything needed to turn packed records back into boxes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecodeContext<T> {
    pub local_origin: Point2<T>,
    pub local_resolution: T,
    pub dict_extent: BBox<T>,
}

impl<T: Real> DecodeContext<T> {
    /// Side lengths of one descriptor-origin lattice cell.
    pub fn lattice_pitch(&self) -> (T, T) {
        let n = T::lit(f64::from(LATTICE_CELLS));
        (self.dict_extent.width() / n, self.dict_extent.height() / n)
    }
}

/// One 42-bit part record, stored in the low bits of a `u64`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PackedPart(u64);

impl PackedPart {
    pub fn from_fields(fields: [u8; 6]) -> Result<Self> {
        let mut bits = 0u64;
        for f in fields {
            if u64::from(f) > FIELD_MAX {
                return Err(Error::Range(format!("field value {f} exceeds 7 bits")));
            }
            bits = (bits << FIELD_BITS) | u64::from(f);
        }
        Ok(Self(bits))
    }

    pub fn from_bits(bits: u64) -> Result<Self> {
        if bits >> PART_BITS != 0 {
            return Err(Error::CorruptRecord(format!(
                "{bits:#x} is wider than 42 bits"
            )));
        }
        Ok(Self(bits))
    }

    pub fn bits(&self) -> u64 {
        self.0
    }

    /// `[x_begin, x_end, y_begin, y_end, x̂_begin, ŷ_begin]`
    pub fn fields(&self) -> [u8; 6] {
        std::array::from_fn(|i| ((self.0 >> (FIELD_BITS as usize * (5 - i))) & FIELD_MAX) as u8)
    }
}

fn quantize_local<T: Real>(v: T, origin: T, res: T, what: &str) -> Result<u8> {
    let q = ((v - origin) / res).round();
    match q.to_i64() {
        Some(q) if (0..=FIELD_MAX as i64).contains(&q) => Ok(q as u8),
        _ => Err(Error::Range(format!(
            "keypoint {what} = {v} is outside the 12.7 m window at {origin}"
        ))),
    }
}

fn quantize_lattice<T: Real>(v: T, begin: T, end: T, pitch: T, what: &str) -> Result<u8> {
    let slack = (end - begin) * T::lit(1e-9);
    if v < begin - slack || v > end + slack {
        return Err(Error::Range(format!(
            "descriptor {what} = {v} is outside the dictionary extent [{begin}, {end}]"
        )));
    }
    if pitch <= T::zero() {
        return Ok(0);
    }
    let q = ((v - begin) / pitch).floor().to_i64().unwrap_or(0);
    Ok(q.clamp(0, FIELD_MAX as i64) as u8)
}

pub fn pack_part<T: Real>(p: &Part<T>, ctx: &DecodeContext<T>) -> Result<PackedPart> {
    let (o, res) = (ctx.local_origin, ctx.local_resolution);
    let kb = &p.keypoint_bb;
    let ext = &ctx.dict_extent;
    let (px, py) = ctx.lattice_pitch();
    PackedPart::from_fields([
        quantize_local(kb.x_begin(), o.x, res, "x_begin")?,
        quantize_local(kb.x_end(), o.x, res, "x_end")?,
        quantize_local(kb.y_begin(), o.y, res, "y_begin")?,
        quantize_local(kb.y_end(), o.y, res, "y_end")?,
        quantize_lattice(
            p.descriptor_bb.x_begin(),
            ext.x_begin(),
            ext.x_end(),
            px,
            "x_begin",
        )?,
        quantize_lattice(
            p.descriptor_bb.y_begin(),
            ext.y_begin(),
            ext.y_end(),
            py,
            "y_begin",
        )?,
    ])
}

/// Decodes a record. The score is unknown (`None`); an all-zero record yields
/// a zero-area part at the local origin, reported by [`Part::is_empty`].
pub fn unpack_part<T: Real>(b: PackedPart, ctx: &DecodeContext<T>) -> Result<Part<T>> {
    let [xb, xe, yb, ye, dx, dy] = b.fields();
    if xb > xe || yb > ye {
        return Err(Error::CorruptRecord(format!(
            "keypoint box [{xb}, {xe}] x [{yb}, {ye}] is inverted"
        )));
    }
    let (o, res) = (ctx.local_origin, ctx.local_resolution);
    let step = |q: u8| T::lit(f64::from(q)) * res;
    let keypoint_bb = BBox::new(
        o.x + step(xb),
        o.x + step(xe),
        o.y + step(yb),
        o.y + step(ye),
    )?;
    let (px, py) = ctx.lattice_pitch();
    let half = T::lit(0.5);
    let ext = &ctx.dict_extent;
    let descriptor_bb = BBox::from_corner(
        ext.x_begin() + (T::lit(f64::from(dx)) + half) * px,
        ext.y_begin() + (T::lit(f64::from(dy)) + half) * py,
        keypoint_bb.width(),
        keypoint_bb.height(),
    )?;
    Ok(Part {
        keypoint_bb,
        descriptor_bb,
        as_score: None,
    })
}

/// The `min(k, |pool|)` best parts in [`part_order`].
pub fn select_top_k<T: Real>(pool: &[Part<T>], k: usize) -> Result<Vec<Part<T>>> {
    if pool.is_empty() {
        return Err(Error::invalid("part pool is empty"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let mut sorted = pool.to_vec();
    sorted.sort_by(part_order);
    sorted.truncate(k);
    Ok(sorted)
}

fn quantize_score<T: Real>(s: T) -> u8 {
    (s.as_f64().clamp(0.0, 1.0) * 255.0).round() as u8
}

fn dequantize_score<T: Real>(b: u8) -> T {
    T::lit(f64::from(b) / 255.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapDescriptor<T> {
    pub map_id: String,
    pub dictionary_id: String,
    pub parts: Vec<Part<T>>,
    pub local_origin: Point2<T>,
    pub local_resolution: T,
    pub dict_extent: BBox<T>,
}

impl<T: Real> MapDescriptor<T> {
    /// Wraps already-ranked parts without quantizing them.
    pub fn from_parts(
        map_id: impl Into<String>,
        dictionary_id: impl Into<String>,
        parts: Vec<Part<T>>,
        ctx: DecodeContext<T>,
    ) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::invalid("a descriptor needs at least one part"));
        }
        Ok(Self {
            map_id: map_id.into(),
            dictionary_id: dictionary_id.into(),
            parts,
            local_origin: ctx.local_origin,
            local_resolution: ctx.local_resolution,
            dict_extent: ctx.dict_extent,
        })
    }

    pub fn context(&self) -> DecodeContext<T> {
        DecodeContext {
            local_origin: self.local_origin,
            local_resolution: self.local_resolution,
            dict_extent: self.dict_extent,
        }
    }

    pub fn k(&self) -> usize {
        self.parts.len()
    }

    pub fn payload_bits(&self) -> usize {
        PART_BITS * self.parts.len()
    }

    pub fn has_scores(&self) -> bool {
        self.parts.iter().all(|p| p.as_score.is_some())
    }

    pub fn pack(&self) -> Result<Vec<PackedPart>> {
        let ctx = self.context();
        self.parts.iter().map(|p| pack_part(p, &ctx)).collect()
    }

    /// What a reader of this descriptor's file will see: boxes snapped to the
    /// codec lattice and scores rounded to 8 bits.
    pub fn quantized(&self) -> Result<Self> {
        let ctx = self.context();
        let parts = self
            .parts
            .iter()
            .map(|p| {
                let mut q = unpack_part(pack_part(p, &ctx)?, &ctx)?;
                q.as_score = p.as_score.map(|s| dequantize_score(quantize_score(s)));
                Ok(q)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            parts,
            ..self.clone()
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let k = u16::try_from(self.parts.len()).map_err(|_| {
            Error::Range(format!("{} parts exceed the u16 count", self.parts.len()))
        })?;
        let mut out = Vec::with_capacity(64 + payload_bytes(self.parts.len()));
        out.extend_from_slice(MAGIC);
        out.push(FORMAT_VERSION);
        for s in [&self.map_id, &self.dictionary_id] {
            let len =
                u16::try_from(s.len()).map_err(|_| Error::Range("identifier too long".into()))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        }
        let e = &self.dict_extent;
        for v in [
            self.local_origin.x,
            self.local_origin.y,
            self.local_resolution,
            e.x_begin(),
            e.x_end(),
            e.y_begin(),
            e.y_end(),
        ] {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
        out.extend_from_slice(&k.to_le_bytes());
        out.extend_from_slice(&pack_payload(&self.pack()?));
        if self.has_scores() {
            out.push(1);
            out.extend(
                self.parts
                    .iter()
                    .map(|p| quantize_score(p.as_score.unwrap_or(T::zero()))),
            );
        } else {
            out.push(0);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = r.take(1)?[0];
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let map_id = r.string()?;
        let dictionary_id = r.string()?;
        let mut f = [0.0f64; 7];
        for v in &mut f {
            *v = r.f64()?;
        }
        let ctx = DecodeContext {
            local_origin: Point2::new(T::lit(f[0]), T::lit(f[1])),
            local_resolution: T::lit(f[2]),
            dict_extent: BBox::new(T::lit(f[3]), T::lit(f[4]), T::lit(f[5]), T::lit(f[6]))
                .map_err(|e| Error::Format(e.to_string()))?,
        };
        if !(ctx.local_resolution > T::zero()) {
            return Err(Error::Format("local resolution must be positive".into()));
        }
        let k = u16::from_le_bytes(r.take(2)?.try_into().expect("2 bytes")) as usize;
        if k == 0 {
            return Err(Error::Format("descriptor has no parts".into()));
        }
        let records = unpack_payload(r.take(payload_bytes(k))?, k)?;
        let mut parts = records
            .into_iter()
            .map(|b| unpack_part(b, &ctx))
            .collect::<Result<Vec<_>>>()?;
        match r.take(1)?[0] {
            0 => {}
            1 => {
                for (p, &s) in parts.iter_mut().zip(r.take(k)?) {
                    p.as_score = Some(dequantize_score(s));
                }
            }
            other => return Err(Error::Format(format!("bad score flag {other}"))),
        }
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes".into()));
        }
        Self::from_parts(map_id, dictionary_id, parts, ctx)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

pub fn payload_bytes(k: usize) -> usize {
    (PART_BITS * k).div_ceil(8)
}

/// Concatenates records MSB-first and zero-pads the final byte.
pub fn pack_payload(records: &[PackedPart]) -> Vec<u8> {
    let mut out = vec![0u8; payload_bytes(records.len())];
    let mut bit = 0usize;
    for r in records {
        for i in (0..PART_BITS).rev() {
            if (r.0 >> i) & 1 == 1 {
                out[bit / 8] |= 0x80 >> (bit % 8);
            }
            bit += 1;
        }
    }
    out
}

pub fn unpack_payload(bytes: &[u8], k: usize) -> Result<Vec<PackedPart>> {
    if bytes.len() != payload_bytes(k) {
        return Err(Error::Format(format!(
            "payload is {} bytes, expected {}",
            bytes.len(),
            payload_bytes(k)
        )));
    }
    let mut bit = 0usize;
    let records = (0..k)
        .map(|_| {
            let mut v = 0u64;
            for _ in 0..PART_BITS {
                v = (v << 1) | u64::from((bytes[bit / 8] >> (7 - bit % 8)) & 1);
                bit += 1;
            }
            PackedPart(v)
        })
        .collect();
    Ok(records)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Format("unexpected end of file".into()))?;
        self.pos = end;
        Ok(s)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn string(&mut self) -> Result<String> {
        let len = u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")) as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Decode context this crate uses for `map` against `dict_extent`.
pub fn context_for<T: Real>(map: &PointSetMap<T>, dict_extent: &BBox<T>) -> DecodeContext<T> {
    DecodeContext {
        local_origin: map.extent().min_corner(),
        local_resolution: T::lit(LOCAL_RESOLUTION),
        dict_extent: *dict_extent,
    }
}

/// Top-`k` parts of an already discovered pool, quantized as stored on disk.
pub fn descriptor_from_pool<T: Real>(
    map: &PointSetMap<T>,
    dict: &Dictionary<T>,
    pool: &[Part<T>],
    k: usize,
) -> Result<MapDescriptor<T>> {
    let parts = select_top_k(pool, k)?;
    MapDescriptor::from_parts(map.id(), dict.id(), parts, context_for(map, dict.extent()))?
        .quantized()
}

pub fn build_descriptor_in<T: Real>(
    map: &PointSetMap<T>,
    dict: &Dictionary<T>,
    k: usize,
    cpd_cfg: &CpdConfig,
) -> Result<MapDescriptor<T>> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let pool = discover_parts_in(map, dict, cpd_cfg)?;
    descriptor_from_pool(map, dict, &pool, k)
}

/// Discovers parts of `map` against `dictionary` and keeps the `k` best.
pub fn build_descriptor<T: Real>(
    map: &PointSetMap<T>,
    dictionary: &PointSetMap<T>,
    k: usize,
    cpd_cfg: &CpdConfig,
) -> Result<MapDescriptor<T>> {
    cpd_cfg.validate()?;
    build_descriptor_in(map, &Dictionary::new(dictionary, cpd_cfg)?, k, cpd_cfg)
}
