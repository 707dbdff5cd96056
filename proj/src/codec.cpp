#include "bgl/codec.hpp"

#include <sodium.h>

namespace bgl {

namespace {

void put_u64(Bytes& out, std::uint64_t v)
{
    for (int shift = 56; shift >= 0; shift -= 8)
        out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void put_bytes(Bytes& out, ByteSpan data)
{
    if (data.size() > 0xffffffffull) throw CodecError("byte string too long");
    auto len = static_cast<std::uint32_t>(data.size());
    for (int shift = 24; shift >= 0; shift -= 8)
        out.push_back(static_cast<std::uint8_t>(len >> shift));
    out.insert(out.end(), data.begin(), data.end());
}

void put_count(Bytes& out, std::size_t n)
{
    if (n > 0xffffffffull) throw CodecError("list too long");
    auto len = static_cast<std::uint32_t>(n);
    for (int shift = 24; shift >= 0; shift -= 8)
        out.push_back(static_cast<std::uint8_t>(len >> shift));
}

void put_account(Bytes& out, const AccountId& a)
{
    out.push_back(kTagAccount);
    put_bytes(out, a.bank.key);
    put_bytes(out, a.user.key);
}

void put_digest(Bytes& out, const Digest& d)
{
    put_bytes(out, ByteSpan(d.bytes.data(), d.bytes.size()));
}

void put_ref(Bytes& out, const NodeRef& r)
{
    out.push_back(kTagNodeRef);
    put_bytes(out, r.bank.key);
    put_u64(out, r.seq);
    put_digest(out, r.hash);
}

void put_tx_body(Bytes& out, const Transaction& t)
{
    out.push_back(kTagTransaction);
    put_account(out, t.source);
    put_account(out, t.dest);
    put_u64(out, t.amount);
    put_u64(out, t.seq);
}

struct Reader {
    ByteSpan data;
    std::size_t pos = 0;

    std::uint8_t byte()
    {
        if (pos >= data.size()) throw CodecError("truncated input");
        return data[pos++];
    }

    void expect_tag(std::uint8_t tag)
    {
        if (byte() != tag) throw CodecError("unexpected record tag");
    }

    std::uint64_t u64()
    {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v = v << 8 | byte();
        return v;
    }

    std::uint32_t u32()
    {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = v << 8 | byte();
        return v;
    }

    Bytes bytes_field()
    {
        std::uint32_t len = u32();
        if (pos + len > data.size()) throw CodecError("truncated byte string");
        Bytes out(data.begin() + pos, data.begin() + pos + len);
        pos += len;
        return out;
    }

    AccountId account()
    {
        expect_tag(kTagAccount);
        AccountId a;
        a.bank.key = bytes_field();
        a.user.key = bytes_field();
        return a;
    }

    Digest digest()
    {
        Bytes raw = bytes_field();
        if (raw.size() != 32) throw CodecError("digest must be 32 bytes");
        Digest d;
        std::copy(raw.begin(), raw.end(), d.bytes.begin());
        return d;
    }

    NodeRef ref()
    {
        expect_tag(kTagNodeRef);
        NodeRef r;
        r.bank.key = bytes_field();
        r.seq = u64();
        r.hash = digest();
        return r;
    }

    Transaction transaction()
    {
        expect_tag(kTagTransaction);
        Transaction t;
        t.source = account();
        t.dest = account();
        t.amount = u64();
        t.seq = u64();
        t.sig = bytes_field();
        return t;
    }

    void done() const
    {
        if (pos != data.size()) throw CodecError("trailing bytes");
    }
};

std::uint8_t node_tag(NodeKind k)
{
    switch (k) {
    case NodeKind::Init: return kTagInit;
    case NodeKind::Start: return kTagStart;
    case NodeKind::Update: return kTagUpdate;
    case NodeKind::Close: return kTagClose;
    case NodeKind::Accept: return kTagAccept;
    }
    throw CodecError("bad node kind");
}

void put_node_body(Bytes& out, const Node& n)
{
    out.push_back(node_tag(n.kind));
    if (n.kind == NodeKind::Init) {
        put_count(out, n.init_payload.size());
        for (const auto& e : n.init_payload) {
            put_account(out, e.account);
            put_u64(out, e.amount);
        }
        return;
    }
    put_bytes(out, n.bank.key);
    put_u64(out, n.seq);
    put_digest(out, n.parent);
    switch (n.kind) {
    case NodeKind::Start:
        put_count(out, n.txs.size());
        for (const auto& t : n.txs) {
            put_tx_body(out, t);
            put_bytes(out, t.sig);
        }
        break;
    case NodeKind::Update:
        put_count(out, n.refs.size());
        for (const auto& r : n.refs) put_ref(out, r);
        break;
    default:
        break; // close and accept carry no payload
    }
}

} // namespace

Bytes tx_signing_payload(const Transaction& t)
{
    Bytes out;
    put_tx_body(out, t);
    return out;
}

Bytes encode_transaction(const Transaction& t)
{
    Bytes out;
    put_tx_body(out, t);
    put_bytes(out, t.sig);
    return out;
}

Transaction decode_transaction(ByteSpan data)
{
    Reader r{data};
    Transaction t = r.transaction();
    r.done();
    return t;
}

Bytes node_signing_payload(const Node& n)
{
    Bytes out;
    put_node_body(out, n);
    return out;
}

Bytes encode_node(const Node& n)
{
    Bytes out;
    put_node_body(out, n);
    if (n.kind != NodeKind::Init) put_bytes(out, n.sig);
    return out;
}

Node decode_node(ByteSpan data)
{
    Reader r{data};
    Node n;
    std::uint8_t tag = r.byte();
    switch (tag) {
    case kTagInit: n.kind = NodeKind::Init; break;
    case kTagStart: n.kind = NodeKind::Start; break;
    case kTagUpdate: n.kind = NodeKind::Update; break;
    case kTagClose: n.kind = NodeKind::Close; break;
    case kTagAccept: n.kind = NodeKind::Accept; break;
    default: throw CodecError("unknown node tag");
    }
    if (n.kind == NodeKind::Init) {
        std::uint32_t count = r.u32();
        for (std::uint32_t i = 0; i < count; ++i) {
            InitEntry e;
            e.account = r.account();
            e.amount = r.u64();
            n.init_payload.push_back(std::move(e));
        }
        r.done();
        return n;
    }
    n.bank.key = r.bytes_field();
    n.seq = r.u64();
    n.parent = r.digest();
    if (n.kind == NodeKind::Start) {
        std::uint32_t count = r.u32();
        for (std::uint32_t i = 0; i < count; ++i) n.txs.push_back(r.transaction());
    } else if (n.kind == NodeKind::Update) {
        std::uint32_t count = r.u32();
        for (std::uint32_t i = 0; i < count; ++i) n.refs.push_back(r.ref());
    }
    n.sig = r.bytes_field();
    r.done();
    return n;
}

Digest sha256(ByteSpan data)
{
    Digest d;
    crypto_hash_sha256(d.bytes.data(), data.data(), data.size());
    return d;
}

Digest node_hash(const Node& n)
{
    Bytes enc = encode_node(n);
    return sha256(enc);
}

Digest tx_hash(const Transaction& t)
{
    Bytes enc = encode_transaction(t);
    return sha256(enc);
}

} // namespace bgl
