#include "bgl/crypto.hpp"

#include <mutex>
#include <stdexcept>

#include <sodium.h>

#include "bgl/codec.hpp"

namespace bgl {

namespace {

void ensure_sodium()
{
    static std::once_flag flag;
    std::call_once(flag, [] {
        if (sodium_init() < 0) throw std::runtime_error("sodium_init failed");
    });
}

Bytes seed_bytes(std::uint64_t seed, const char* domain)
{
    Bytes material;
    for (const char* p = domain; *p; ++p) material.push_back(static_cast<std::uint8_t>(*p));
    for (int shift = 56; shift >= 0; shift -= 8)
        material.push_back(static_cast<std::uint8_t>(seed >> shift));
    Digest d = sha256(material);
    return Bytes(d.bytes.begin(), d.bytes.end());
}

class Ed25519Scheme final : public SignatureScheme {
public:
    const char* name() const override { return "real"; }

    KeyPair keygen(std::uint64_t seed) const override
    {
        ensure_sodium();
        Bytes sk_seed = seed_bytes(seed, "bgl-ed25519-seed");
        KeyPair kp;
        kp.pub.resize(crypto_sign_PUBLICKEYBYTES);
        kp.sec.resize(crypto_sign_SECRETKEYBYTES);
        crypto_sign_seed_keypair(kp.pub.data(), kp.sec.data(), sk_seed.data());
        return kp;
    }

    Bytes sign(const Bytes& secret, ByteSpan message) const override
    {
        ensure_sodium();
        if (secret.size() != crypto_sign_SECRETKEYBYTES)
            throw std::invalid_argument("bad ed25519 secret key size");
        Bytes sig(crypto_sign_BYTES);
        unsigned long long len = 0;
        crypto_sign_detached(sig.data(), &len, message.data(), message.size(), secret.data());
        sig.resize(len);
        return sig;
    }

    bool verify(const Bytes& pub, ByteSpan message, const Bytes& sig) const override
    {
        ensure_sodium();
        if (pub.size() != crypto_sign_PUBLICKEYBYTES || sig.size() != crypto_sign_BYTES)
            return false;
        return crypto_sign_verify_detached(sig.data(), message.data(), message.size(),
                                           pub.data()) == 0;
    }
};

class HashTestScheme final : public SignatureScheme {
public:
    const char* name() const override { return "test"; }

    KeyPair keygen(std::uint64_t seed) const override
    {
        KeyPair kp;
        kp.sec = seed_bytes(seed, "bgl-test-key");
        kp.pub = kp.sec;
        return kp;
    }

    Bytes sign(const Bytes& secret, ByteSpan message) const override
    {
        Bytes buf = secret;
        buf.insert(buf.end(), message.begin(), message.end());
        Digest d = sha256(buf);
        return Bytes(d.bytes.begin(), d.bytes.end());
    }

    bool verify(const Bytes& pub, ByteSpan message, const Bytes& sig) const override
    {
        if (pub.empty() || sig.size() != 32) return false;
        Bytes buf = pub;
        buf.insert(buf.end(), message.begin(), message.end());
        Digest d = sha256(buf);
        return std::equal(d.bytes.begin(), d.bytes.end(), sig.begin());
    }
};

} // namespace

const SignatureScheme& ed25519_scheme()
{
    static Ed25519Scheme scheme;
    return scheme;
}

const SignatureScheme& test_scheme()
{
    static HashTestScheme scheme;
    return scheme;
}

const SignatureScheme& scheme_by_name(const std::string& name)
{
    if (name == "real") return ed25519_scheme();
    if (name == "test") return test_scheme();
    throw std::invalid_argument("unknown signature scheme: " + name);
}

Transaction make_transaction(const SignatureScheme& scheme, const AccountId& source,
                             const AccountId& dest, Money amount, std::uint64_t seq,
                             const Bytes& secret_key)
{
    if (amount == 0 || amount > kMaxAmount)
        throw std::invalid_argument("transaction amount must be in (0, 2^62]");
    if (seq == 0) throw std::invalid_argument("sequence numbers start at 1");
    Transaction t;
    t.source = source;
    t.dest = dest;
    t.amount = amount;
    t.seq = seq;
    t.sig = scheme.sign(secret_key, tx_signing_payload(t));
    if (!verify_transaction(scheme, t))
        throw std::invalid_argument("secret key does not match source account user");
    return t;
}

bool verify_transaction(const SignatureScheme& scheme, const Transaction& t)
{
    if (t.amount == 0 || t.amount > kMaxAmount || t.seq == 0) return false;
    return scheme.verify(t.source.user.key, tx_signing_payload(t), t.sig);
}

void sign_node(const SignatureScheme& scheme, Node& n, const Bytes& secret_key)
{
    if (n.kind == NodeKind::Init) return;
    n.sig = scheme.sign(secret_key, node_signing_payload(n));
}

bool verify_node(const SignatureScheme& scheme, const Node& n)
{
    if (n.kind == NodeKind::Init) return true;
    return scheme.verify(n.bank.key, node_signing_payload(n), n.sig);
}

} // namespace bgl
