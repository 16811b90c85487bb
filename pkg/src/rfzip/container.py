"""The .rfz container: compress, bit-exact decompress, and prediction without
full decompression.

Layout (all integers little-endian, varints LEB128, bitstreams MSB-first):

    magic "RFZ1" | version u8 | task u8 | flags u8 | reserved u8
    A u32 | d u32 | T u32 | n_obs u64
    section table: 8 x (offset u64, length u64)
    sections: schema, tables, structure, models, names, splits, fits, index

The names/splits/fits sections hold one contiguous bit segment per tree, in
tree order, each segment's symbols in preorder.  The index section records the
three per-tree segment bit lengths, so any tree's segments can be located
without touching another tree's payload.  Symbols are coded per coding context
through the context -> cluster map and that cluster's code table.

Full byte-level description in docs/container.md.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .arith import BinaryArithmeticDecoder, BinaryArithmeticEncoder, quantize_p1
from .bitio import BitReader, BitWriter, ByteCursor, write_uvarint
from .clustering import cluster_search, problem_from_models
from .entropy import (EmpiricalDistribution, HuffmanTable, build_huffman,
                      dictionary_cost, parse_table, serialize_table)
from .errors import CorruptContainer, RfzError, TruncatedStream
from .forest import (CATEGORICAL, CLASSIFICATION, REGRESSION, Forest, Node,
                     NumericSplit, Variable, VariableSchema, aggregate_fits,
                     encode_observation, iter_nodes, validate_forest)
from .models import FITS, NAMES, ROOT, SPLITS, ValueTables, extract_models
from .structure import (StructureStream, pack_structures, parse_stream,
                        serialize_stream, unpack_all, unpack_structure)
from .zaks import decode_prefix, zaks_encode

MAGIC = b"RFZ1"
VERSION = 1
_HEADER_LEN = 28
_N_SECTIONS = 8
_TABLE_LEN = _N_SECTIONS * 16
_FIXED_LEN = _HEADER_LEN + _TABLE_LEN

_SEC_SCHEMA, _SEC_TABLES, _SEC_STRUCT, _SEC_MODELS = 0, 1, 2, 3
_SEC_NAMES, _SEC_SPLITS, _SEC_FITS, _SEC_INDEX = 4, 5, 6, 7

_FLAG_ARITH_FITS = 1

HUFFMAN = "huffman"
ARITHMETIC = "arithmetic"


@dataclass(frozen=True)
class CompressOptions:
    k_max: int = 32
    seed: int = 0
    fit_coder: str = "auto"  # auto | huffman | arithmetic
    restarts: int = 8

    def validate(self) -> None:
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.fit_coder not in ("auto", HUFFMAN, ARITHMETIC):
            raise ValueError(f"unknown fit coder {self.fit_coder!r}")


@dataclass
class FamilyCodec:
    """Cluster map and per-cluster code tables for one stream family."""

    coder: str                                  # huffman | arithmetic
    cluster_of: dict[tuple[int, int], int]      # (depth, father) -> cluster
    tables: list[HuffmanTable] = field(default_factory=list)
    p1s: list[int] = field(default_factory=list)  # 16-bit fixed point, arithmetic only
    _decode_cache: dict = field(default_factory=dict, repr=False)

    @property
    def k(self) -> int:
        return len(self.tables) if self.coder == HUFFMAN else len(self.p1s)

    def decode_info(self, cluster: int):
        info = self._decode_cache.get(cluster)
        if info is None:
            info = self._decode_cache[cluster] = self.tables[cluster].decode_tables()
        return info


@dataclass
class SizeReport:
    structure: int
    names: int
    splits: int
    fits: int
    tables: int
    total: int

    def to_dict(self) -> dict:
        return {
            "structure_bytes": self.structure,
            "names_bytes": self.names,
            "splits_bytes": self.splits,
            "fits_bytes": self.fits,
            "tables_bytes": self.tables,
            "total_bytes": self.total,
        }


@dataclass
class CompressedContainer:
    data: bytes
    task: str
    a: int
    d: int
    t: int
    n_obs: int
    fits_arithmetic: bool
    schema: VariableSchema
    labels: tuple[str, ...]
    tables: ValueTables
    stream: StructureStream
    names_codec: FamilyCodec
    splits_codecs: list[FamilyCodec]
    fits_codec: FamilyCodec
    section_spans: list[tuple[int, int]]
    tree_segments: dict[str, list[tuple[int, int]]]  # family -> per-tree (start, end) bits
    _frame_cache: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Compression
# ---------------------------------------------------------------------------

def _family_seed(seed: int, code: int) -> int:
    return (seed * 1000003 + code) & 0x7FFFFFFF


def _cluster_family(models: dict, alpha: float, opts: CompressOptions, code: int):
    """Cluster one family's models (sorted context order) -> (contexts, assignment, centers_counts)."""
    contexts = sorted(models.keys())
    ordered = [models[c] for c in contexts]
    prob = problem_from_models(
        ordered, alpha=alpha, k_max=opts.k_max, seed=_family_seed(opts.seed, code),
        restarts=opts.restarts)
    result = cluster_search(prob)
    k = result.k
    pooled = [[0] * len(ordered[0].counts) for _ in range(k)]
    for i, model in enumerate(ordered):
        c = int(result.assignment[i])
        for s, cnt in enumerate(model.counts):
            pooled[c][s] += cnt
    cluster_of = {(ctx.depth, ctx.father): int(result.assignment[i])
                  for i, ctx in enumerate(contexts)}
    return cluster_of, pooled


def _huffman_codec(cluster_of, pooled) -> FamilyCodec:
    tables = [build_huffman(EmpiricalDistribution(tuple(counts))) for counts in pooled]
    return FamilyCodec(coder=HUFFMAN, cluster_of=cluster_of, tables=tables)


def _arith_codec(cluster_of, pooled) -> FamilyCodec:
    p1s = []
    for counts in pooled:
        total = counts[0] + counts[1]
        p1s.append(quantize_p1(counts[1] / total if total else 0.5))
    return FamilyCodec(coder=ARITHMETIC, cluster_of=cluster_of, p1s=p1s)


def compress(forest: Forest, opts: CompressOptions = CompressOptions()) -> bytes:
    """Encode a forest into container bytes; decompress() is its exact inverse."""
    opts.validate()
    validate_forest(forest)
    schema = forest.schema
    d = schema.d

    seqs = [zaks_encode(root) for root in forest.trees]
    stream = pack_structures(seqs)

    ex = extract_models(forest)
    tables = ex.tables

    # Fit coder choice: arithmetic pays off for two-class fits.
    fit_b = tables.fit_alphabet
    if opts.fit_coder == ARITHMETIC and not (
            forest.task == CLASSIFICATION and fit_b == 2):
        raise ValueError("arithmetic fit coding needs a two-class classification forest")
    use_arith = (opts.fit_coder == ARITHMETIC or
                 (opts.fit_coder == "auto" and forest.task == CLASSIFICATION and fit_b == 2))

    if ex.names:
        names_codec = _huffman_codec(*_cluster_family(
            ex.names, dictionary_cost("names", d=d).alpha, opts, 1))
    else:
        names_codec = FamilyCodec(coder=HUFFMAN, cluster_of={})
    splits_codecs = []
    for var in range(d):
        per_var = ex.splits[var]
        if not per_var:
            splits_codecs.append(FamilyCodec(coder=HUFFMAN, cluster_of={}))
            continue
        c_j = tables.split_alphabet(var)
        if schema.variables[var].kind == CATEGORICAL:
            alpha = dictionary_cost("categorical_split", c=c_j).alpha
        else:
            alpha = dictionary_cost("numerical_split", n=schema.n_obs, c=c_j).alpha
        splits_codecs.append(_huffman_codec(*_cluster_family(per_var, alpha, opts, 100 + var)))
    fit_cluster_of, fit_pooled = _cluster_family(
        ex.fits, dictionary_cost("fits", c=fit_b).alpha, opts, 2)
    fits_codec = (_arith_codec(fit_cluster_of, fit_pooled) if use_arith
                  else _huffman_codec(fit_cluster_of, fit_pooled))

    # Payload: per tree, three preorder bit segments.
    names_w, splits_w, fits_w = BitWriter(), BitWriter(), BitWriter()
    seg_lengths: list[tuple[int, int, int]] = []
    name_codes = [t.codewords() for t in names_codec.tables]
    split_codes = [[t.codewords() for t in fc.tables] for fc in splits_codecs]
    fit_codes = ([t.codewords() for t in fits_codec.tables]
                 if fits_codec.coder == HUFFMAN else None)
    for tree_id, root in enumerate(forest.trees):
        n0, s0, f0 = names_w.bit_length, splits_w.bit_length, fits_w.bit_length
        arith = BinaryArithmeticEncoder(fits_w) if use_arith else None
        for node, depth, father, _pos in iter_nodes(root):
            key = (depth, father)
            fsym = tables.fit_symbol(forest.task, node.fit)
            if use_arith:
                arith.encode(fsym, fits_codec.p1s[fits_codec.cluster_of[key]])
            else:
                code, length = fit_codes[fits_codec.cluster_of[key]][fsym]
                if length:
                    fits_w.write_bits(code, length)
            if node.is_leaf:
                continue
            code, length = name_codes[names_codec.cluster_of[key]][node.var]
            if length:
                names_w.write_bits(code, length)
            ssym = tables.split_symbol(node.var, node.split)
            code, length = split_codes[node.var][splits_codecs[node.var].cluster_of[key]][ssym]
            if length:
                splits_w.write_bits(code, length)
        if use_arith:
            arith.finish()
        seg_lengths.append((names_w.bit_length - n0, splits_w.bit_length - s0,
                            fits_w.bit_length - f0))

    sections = [b""] * _N_SECTIONS
    sections[_SEC_SCHEMA] = _serialize_schema(forest)
    sections[_SEC_TABLES] = _serialize_tables(forest, tables)
    sections[_SEC_STRUCT] = serialize_stream(stream)
    sections[_SEC_MODELS] = _serialize_models(names_codec, splits_codecs, fits_codec)
    sections[_SEC_NAMES] = names_w.getvalue()
    sections[_SEC_SPLITS] = splits_w.getvalue()
    sections[_SEC_FITS] = fits_w.getvalue()
    sections[_SEC_INDEX] = _serialize_index(seg_lengths)

    head = bytearray()
    head += MAGIC
    head.append(VERSION)
    head.append(0 if forest.task == CLASSIFICATION else 1)
    head.append(_FLAG_ARITH_FITS if use_arith else 0)
    head.append(0)
    head += forest.a.to_bytes(4, "little")
    head += d.to_bytes(4, "little")
    head += forest.max_depth.to_bytes(4, "little")
    head += schema.n_obs.to_bytes(8, "little")
    offset = _FIXED_LEN
    for sec in sections:
        head += offset.to_bytes(8, "little")
        head += len(sec).to_bytes(8, "little")
        offset += len(sec)
    return bytes(head) + b"".join(sections)


def _serialize_schema(forest: Forest) -> bytes:
    out = bytearray()
    write_uvarint(out, forest.schema.d)
    for var in forest.schema.variables:
        raw = var.name.encode("utf-8")
        write_uvarint(out, len(raw))
        out += raw
        out.append(1 if var.kind == CATEGORICAL else 0)
        if var.kind == CATEGORICAL:
            write_uvarint(out, var.n_categories)
            for cat in var.categories:
                braw = cat.encode("utf-8")
                write_uvarint(out, len(braw))
                out += braw
    write_uvarint(out, len(forest.labels))
    for label in forest.labels:
        raw = label.encode("utf-8")
        write_uvarint(out, len(raw))
        out += raw
    return bytes(out)


def _write_patterns(out: bytearray, patterns) -> None:
    """Sorted 64-bit patterns, each as u8 shared-prefix length plus the suffix
    bytes (big-endian); sorted doubles share exponent/high-mantissa bytes."""
    prev = b"\x00" * 8
    for pattern in patterns:
        raw = pattern.to_bytes(8, "big")
        shared = 0
        while shared < 8 and raw[shared] == prev[shared]:
            shared += 1
        if shared == 8:
            shared = 7  # duplicates cannot occur; keep one suffix byte
        out.append(shared)
        out += raw[shared:]
        prev = raw


def _read_patterns(cur: ByteCursor, count: int) -> list[int]:
    prev = b"\x00" * 8
    out = []
    for _ in range(count):
        shared = cur.read_u8()
        if shared > 7:
            raise CorruptContainer("bad shared-prefix length in a value table")
        raw = prev[:shared] + cur.read(8 - shared)
        out.append(int.from_bytes(raw, "big"))
        prev = raw
    return out


def _serialize_tables(forest: Forest, tables: ValueTables) -> bytes:
    out = bytearray()
    for var in range(forest.schema.d):
        values = tables.split_values[var]
        write_uvarint(out, len(values))
        if forest.schema.variables[var].kind == CATEGORICAL:
            for mask in values:
                write_uvarint(out, mask)
        else:
            _write_patterns(out, values)
    write_uvarint(out, len(tables.fit_values))
    if forest.task == CLASSIFICATION:
        for label_idx in tables.fit_values:
            write_uvarint(out, label_idx)
    else:
        _write_patterns(out, tables.fit_values)
    return bytes(out)


def _serialize_models(names_codec: FamilyCodec, splits_codecs: list[FamilyCodec],
                      fits_codec: FamilyCodec) -> bytes:
    out = bytearray()
    for codec in [names_codec, *splits_codecs, fits_codec]:
        write_uvarint(out, len(codec.cluster_of))
        for (depth, father) in sorted(codec.cluster_of):
            write_uvarint(out, depth)
            write_uvarint(out, father + 1)  # ROOT (-1) -> 0
            write_uvarint(out, codec.cluster_of[(depth, father)])
        write_uvarint(out, codec.k)
        if codec.coder == HUFFMAN:
            for table in codec.tables:
                out += serialize_table(table)
        else:
            for p1 in codec.p1s:
                out.append(p1 & 0xFF)
                out.append(p1 >> 8)
    return bytes(out)


def _serialize_index(seg_lengths: list[tuple[int, int, int]]) -> bytes:
    """Per-tree segment bit lengths: varint triples, or fixed-width packed
    fields when those are smaller (format byte 0 / 1)."""
    as_varints = bytearray([0])
    for triple in seg_lengths:
        for bits in triple:
            write_uvarint(as_varints, bits)
    widths = [max((t[i] for t in seg_lengths), default=0).bit_length()
              for i in range(3)]
    packed = BitWriter()
    for triple in seg_lengths:
        for width, bits in zip(widths, triple):
            packed.write_bits(bits, width)
    as_fixed = bytes([1, widths[0], widths[1], widths[2]]) + packed.getvalue()
    return bytes(as_varints) if len(as_varints) <= len(as_fixed) else as_fixed


def _parse_index(cur: ByteCursor, a: int) -> list[tuple[int, int, int]]:
    fmt = cur.read_u8()
    if fmt == 0:
        return [(cur.read_uvarint(), cur.read_uvarint(), cur.read_uvarint())
                for _ in range(a)]
    if fmt != 1:
        raise CorruptContainer(f"unknown index format {fmt}")
    widths = [cur.read_u8() for _ in range(3)]
    if any(w > 56 for w in widths):
        raise CorruptContainer("implausible index field width")
    total_bits = a * sum(widths)
    payload = cur.read((total_bits + 7) // 8)
    reader = BitReader(payload, end_bit=total_bits)
    return [tuple(reader.read_bits(w) for w in widths) for _ in range(a)]


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def load(data: bytes) -> CompressedContainer:
    """Parse a container's metadata sections; payload stays as bytes."""
    try:
        return _load(data)
    except CorruptContainer:
        raise
    except (RfzError, IndexError, ValueError, OverflowError) as exc:
        raise CorruptContainer(str(exc)) from None


def _load(data: bytes) -> CompressedContainer:
    if len(data) < _FIXED_LEN:
        raise CorruptContainer("too short for a container header")
    if data[:4] != MAGIC:
        raise CorruptContainer("bad magic")
    if data[4] != VERSION:
        raise CorruptContainer(f"unsupported version {data[4]}")
    if data[5] not in (0, 1):
        raise CorruptContainer(f"unknown task byte {data[5]}")
    task = CLASSIFICATION if data[5] == 0 else REGRESSION
    fits_arith = bool(data[6] & _FLAG_ARITH_FITS)
    a = int.from_bytes(data[8:12], "little")
    d = int.from_bytes(data[12:16], "little")
    t = int.from_bytes(data[16:20], "little")
    n_obs = int.from_bytes(data[20:28], "little")
    if a < 1:
        raise CorruptContainer("container with zero trees")
    spans = []
    for i in range(_N_SECTIONS):
        off = int.from_bytes(data[_HEADER_LEN + 16 * i:_HEADER_LEN + 16 * i + 8], "little")
        length = int.from_bytes(data[_HEADER_LEN + 16 * i + 8:_HEADER_LEN + 16 * i + 16], "little")
        if off + length > len(data) or off < _FIXED_LEN:
            raise CorruptContainer(f"section {i} out of bounds")
        spans.append((off, length))

    schema, labels = _parse_schema_section(_cursor(data, spans[_SEC_SCHEMA]), d, n_obs, task)
    tables = _parse_tables_section(_cursor(data, spans[_SEC_TABLES]), schema, task)
    stream = parse_stream(_cursor(data, spans[_SEC_STRUCT]))
    if len(stream.tree_offsets) != a:
        raise CorruptContainer("structure index does not match the tree count")
    names_codec, splits_codecs, fits_codec = _parse_models_section(
        _cursor(data, spans[_SEC_MODELS]), d, fits_arith)

    cur = _cursor(data, spans[_SEC_INDEX])
    starts = [0, 0, 0]
    segments: dict[str, list[tuple[int, int]]] = {NAMES: [], SPLITS: [], FITS: []}
    for triple in _parse_index(cur, a):
        for fam_i, fam in enumerate((NAMES, SPLITS, FITS)):
            length = triple[fam_i]
            segments[fam].append((starts[fam_i], starts[fam_i] + length))
            starts[fam_i] += length
    for fam, sec in ((NAMES, _SEC_NAMES), (SPLITS, _SEC_SPLITS), (FITS, _SEC_FITS)):
        total_bits = segments[fam][-1][1] if segments[fam] else 0
        if (total_bits + 7) // 8 != spans[sec][1]:
            raise CorruptContainer(f"{fam} payload length does not match its index")

    return CompressedContainer(
        data=data, task=task, a=a, d=d, t=t, n_obs=n_obs, fits_arithmetic=fits_arith,
        schema=schema, labels=labels, tables=tables, stream=stream,
        names_codec=names_codec, splits_codecs=splits_codecs, fits_codec=fits_codec,
        section_spans=spans, tree_segments=segments)


def _cursor(data: bytes, span: tuple[int, int]) -> ByteCursor:
    return ByteCursor(data, span[0], span[0] + span[1])


def _parse_schema_section(cur: ByteCursor, d: int, n_obs: int, task: str):
    if cur.read_uvarint() != d:
        raise CorruptContainer("schema variable count disagrees with the header")
    variables = []
    for _ in range(d):
        name = cur.read(cur.read_uvarint()).decode("utf-8")
        kind = cur.read_u8()
        if kind == 1:
            n_cat = cur.read_uvarint()
            cats = tuple(cur.read(cur.read_uvarint()).decode("utf-8") for _ in range(n_cat))
            variables.append(Variable(name, CATEGORICAL, cats))
        elif kind == 0:
            variables.append(Variable(name, "numerical"))
        else:
            raise CorruptContainer(f"unknown variable kind byte {kind}")
    n_labels = cur.read_uvarint()
    labels = tuple(cur.read(cur.read_uvarint()).decode("utf-8") for _ in range(n_labels))
    if task == CLASSIFICATION and not labels:
        raise CorruptContainer("classification container without labels")
    return VariableSchema(tuple(variables), n_obs), labels


def _parse_tables_section(cur: ByteCursor, schema: VariableSchema, task: str) -> ValueTables:
    split_values = []
    for var in schema.variables:
        c = cur.read_uvarint()
        if var.kind == CATEGORICAL:
            split_values.append([cur.read_uvarint() for _ in range(c)])
        else:
            split_values.append(_read_patterns(cur, c))
    c_f = cur.read_uvarint()
    if task == CLASSIFICATION:
        fit_values = [cur.read_uvarint() for _ in range(c_f)]
    else:
        fit_values = _read_patterns(cur, c_f)
    return ValueTables(split_values=split_values, fit_values=fit_values)


def _parse_models_section(cur: ByteCursor, d: int, fits_arith: bool):
    def one(coder: str) -> FamilyCodec:
        m = cur.read_uvarint()
        cluster_of = {}
        for _ in range(m):
            depth = cur.read_uvarint()
            father = cur.read_uvarint() - 1
            cluster_of[(depth, father)] = cur.read_uvarint()
        k = cur.read_uvarint()
        if any(c >= k for c in cluster_of.values()):
            raise CorruptContainer("context mapped to a nonexistent cluster")
        if coder == HUFFMAN:
            tables = [parse_table(cur) for _ in range(k)]
            return FamilyCodec(coder=HUFFMAN, cluster_of=cluster_of, tables=tables)
        p1s = [cur.read_u16le() for _ in range(k)]
        return FamilyCodec(coder=ARITHMETIC, cluster_of=cluster_of, p1s=p1s)

    names_codec = one(HUFFMAN)
    splits_codecs = [one(HUFFMAN) for _ in range(d)]
    fits_codec = one(ARITHMETIC if fits_arith else HUFFMAN)
    return names_codec, splits_codecs, fits_codec


# ---------------------------------------------------------------------------
# Decoding machinery
# ---------------------------------------------------------------------------

class _SegmentDecoder:
    """Sequential symbol decoder over one tree's segment of one family."""

    __slots__ = ("container", "family", "reader", "arith", "tree_id", "_abs_end")

    def __init__(self, container: CompressedContainer, family: str, tree_id: int,
                 access_log: list | None = None) -> None:
        self.container = container
        self.family = family
        self.tree_id = tree_id
        sec = {NAMES: _SEC_NAMES, SPLITS: _SEC_SPLITS, FITS: _SEC_FITS}[family]
        off, _length = container.section_spans[sec]
        start, end = container.tree_segments[family][tree_id]
        pad = family == FITS and container.fits_arithmetic
        self._abs_end = off * 8 + end
        self.reader = BitReader(container.data, start_bit=off * 8 + start,
                                end_bit=self._abs_end, pad=pad)
        self.arith = BinaryArithmeticDecoder(self.reader) if pad else None
        if access_log is not None:
            access_log.append((family, tree_id, start, end))

    def _codec(self, var: int | None) -> FamilyCodec:
        if self.family == NAMES:
            return self.container.names_codec
        if self.family == SPLITS:
            return self.container.splits_codecs[var]
        return self.container.fits_codec

    def decode(self, depth: int, father: int, var: int | None = None) -> int:
        codec = self._codec(var)
        try:
            cluster = codec.cluster_of[(depth, father)]
        except KeyError:
            raise CorruptContainer(
                f"no cluster for context (depth={depth}, father={father}) "
                f"in the {self.family} family") from None
        if codec.coder == ARITHMETIC:
            return self.arith.decode(codec.p1s[cluster])
        table = codec.tables[cluster]
        solo = table.solo_symbol
        if solo is not None:
            return solo
        first_code, first_index, length_count, ordered = codec.decode_info(cluster)
        code = 0
        length = 0
        max_len = len(length_count) - 1
        while True:
            code = (code << 1) | self.reader.read_bit()
            length += 1
            if length > max_len:
                raise CorruptContainer("codeword exceeds the table's maximum length")
            offset = code - first_code[length]
            if 0 <= offset < length_count[length]:
                return ordered[first_index[length] + offset]

    def finish(self) -> None:
        """Huffman streams must land exactly on the recorded segment end."""
        if self.arith is None and self.reader.tell() != self._abs_end:
            raise CorruptContainer(
                f"{self.family} segment of tree {self.tree_id} did not end "
                f"on its recorded bit count")


class _TreeDecoder:
    """Decodes one tree's three segments during a preorder shape walk."""

    def __init__(self, container: CompressedContainer, tree_id: int,
                 access_log: list | None = None) -> None:
        self.container = container
        self.names = _SegmentDecoder(container, NAMES, tree_id, access_log)
        self.splits = _SegmentDecoder(container, SPLITS, tree_id, access_log)
        self.fits = _SegmentDecoder(container, FITS, tree_id, access_log)
        # Decode-table memo: FamilyCodec tables are reused across nodes.

    def decode_node(self, shape, depth: int, father: int):
        """Returns (var, split, fit) for an internal node or (None, None, fit) for a leaf."""
        c = self.container
        fit_sym = self.fits.decode(depth, father)
        fit = c.tables.fit_value(c.task, fit_sym)
        if c.task == CLASSIFICATION and not (0 <= fit < len(c.labels)):
            raise CorruptContainer("fit label index out of range")
        if shape is None:
            return None, None, fit
        var = self.names.decode(depth, father)
        if not (0 <= var < c.d):
            raise CorruptContainer("decoded variable index out of range")
        split_sym = self.splits.decode(depth, father, var)
        if split_sym >= c.tables.split_alphabet(var):
            raise CorruptContainer("decoded split index out of range")
        split = c.tables.split_value(c.schema, var, split_sym)
        return var, split, fit

    def finish(self) -> None:
        self.names.finish()
        self.splits.finish()
        self.fits.finish()


def _decode_tree(container: CompressedContainer, shape, tree_id: int) -> Node:
    dec = _TreeDecoder(container, tree_id)
    holder = Node(fit=None)
    stack = [(shape, 0, ROOT, holder, "left")]  # (shape, depth, father, parent, side)
    while stack:
        sh, depth, father, parent, side = stack.pop()
        var, split, fit = dec.decode_node(sh, depth, father)
        node = Node(fit=fit, var=var, split=split)
        setattr(parent, side, node)
        if sh is not None:
            stack.append((sh[1], depth + 1, var, node, "right"))
            stack.append((sh[0], depth + 1, var, node, "left"))
    dec.finish()
    root = holder.left
    holder.left = None
    return root


def decompress(data: bytes | CompressedContainer) -> Forest:
    """Bit-exact reconstruction of the compressed forest."""
    container = data if isinstance(data, CompressedContainer) else load(data)
    try:
        allbits = unpack_all(container.stream)
        trees = []
        for tree_id in range(container.a):
            start = container.stream.tree_offsets[tree_id]
            shape, _end = decode_prefix(allbits, start)
            trees.append(_decode_tree(container, shape, tree_id))
        forest = Forest(schema=container.schema, task=container.task,
                        trees=tuple(trees), labels=container.labels)
        validate_forest(forest)
        return forest
    except CorruptContainer:
        raise
    except (TruncatedStream, RfzError, IndexError, ValueError) as exc:
        raise CorruptContainer(str(exc)) from None


# ---------------------------------------------------------------------------
# Prediction straight from the container
# ---------------------------------------------------------------------------

def _tree_shape(container: CompressedContainer, tree_id: int):
    cached = container._frame_cache.get(tree_id)
    if cached is None:
        seq = unpack_structure(container.stream, tree_id)
        cached, _ = decode_prefix(seq.bits, 0)
        container._frame_cache[tree_id] = cached
    return cached


def _discard_subtree(dec: _TreeDecoder, shape, depth: int, father: int) -> None:
    stack = [(shape, depth, father)]
    while stack:
        sh, dp, fa = stack.pop()
        var, _split, _fit = dec.decode_node(sh, dp, fa)
        if sh is not None:
            stack.append((sh[1], dp + 1, var))
            stack.append((sh[0], dp + 1, var))


def _predict_tree(container: CompressedContainer, tree_id: int, row,
                  access_log: list | None):
    shape = _tree_shape(container, tree_id)
    dec = _TreeDecoder(container, tree_id, access_log)
    depth, father = 0, ROOT
    while True:
        var, split, fit = dec.decode_node(shape, depth, father)
        if shape is None:
            return fit
        val = row[var]
        if val is None:
            return fit
        if isinstance(split, NumericSplit):
            go_left = val < split.threshold
        else:
            go_left = (split.left_mask >> val) & 1 == 1
        if go_left:
            shape, depth, father = shape[0], depth + 1, var
        else:
            _discard_subtree(dec, shape[0], depth + 1, var)
            shape, depth, father = shape[1], depth + 1, var


def predict_compressed(data: bytes | CompressedContainer, x,
                       access_log: list | None = None):
    """Equals predict(decompress(c), x) exactly, touching only per-tree segments."""
    container = data if isinstance(data, CompressedContainer) else load(data)
    row = encode_observation(container.schema, x)
    fits = [_predict_tree(container, t, row, access_log) for t in range(container.a)]
    return aggregate_fits(container.task, fits)


# ---------------------------------------------------------------------------
# Size report
# ---------------------------------------------------------------------------

def inspect(data: bytes | CompressedContainer) -> SizeReport:
    container = data if isinstance(data, CompressedContainer) else load(data)
    spans = container.section_spans
    dict_bytes = (spans[_SEC_SCHEMA][1] + spans[_SEC_TABLES][1] +
                  spans[_SEC_MODELS][1] + spans[_SEC_INDEX][1])
    total = _FIXED_LEN + sum(length for _off, length in spans)
    return SizeReport(
        structure=spans[_SEC_STRUCT][1],
        names=spans[_SEC_NAMES][1],
        splits=spans[_SEC_SPLITS][1],
        fits=spans[_SEC_FITS][1],
        tables=dict_bytes,
        total=total,
    )
