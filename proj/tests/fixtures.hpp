#pragma once

#include <map>
#include <string>
#include <vector>

#include "bgl/balance.hpp"
#include "bgl/codec.hpp"
#include "bgl/crypto.hpp"
#include "bgl/graph.hpp"

// Hand-building helpers for store/engine tests. Nodes are created and
// inserted directly, bypassing the bank protocol, so tests can assemble
// graphs the protocol would never produce (improper ones included).
namespace bgl::fix {

struct World {
    const SignatureScheme& scheme;
    std::map<std::string, KeyPair> bank_keys;
    std::map<std::string, KeyPair> user_keys;
    std::map<std::string, Digest> heads;         // bank name -> chain head
    std::map<std::string, std::uint64_t> nseq;   // bank name -> next seq
    Blockgraph g;

    struct Grant {
        std::string user;
        std::string bank;
        Money amount;
    };

    explicit World(const std::vector<Grant>& grants, const SignatureScheme& s = test_scheme())
        : scheme(s)
    {
        std::vector<InitEntry> entries;
        for (const auto& grant : grants) {
            entries.push_back({acct(grant.user, grant.bank), grant.amount});
        }
        std::sort(entries.begin(), entries.end(),
                  [](const InitEntry& a, const InitEntry& b) { return a.account < b.account; });
        g = Blockgraph(make_init_node(entries), &scheme);
    }

    KeyPair& bank_key(const std::string& name)
    {
        auto it = bank_keys.find(name);
        if (it == bank_keys.end()) {
            std::uint64_t seed = 1000 + bank_keys.size();
            it = bank_keys.emplace(name, scheme.keygen(seed)).first;
        }
        return it->second;
    }

    KeyPair& user_key(const std::string& name)
    {
        auto it = user_keys.find(name);
        if (it == user_keys.end()) {
            std::uint64_t seed = 2000 + user_keys.size();
            it = user_keys.emplace(name, scheme.keygen(seed)).first;
        }
        return it->second;
    }

    BankId bank(const std::string& name) { return BankId{bank_key(name).pub}; }
    UserId user(const std::string& name) { return UserId{user_key(name).pub}; }
    AccountId acct(const std::string& u, const std::string& b) { return {bank(b), user(u)}; }

    Transaction tx(const std::string& from_user, const std::string& from_bank,
                   const std::string& to_user, const std::string& to_bank, Money amount,
                   std::uint64_t seq)
    {
        return make_transaction(scheme, acct(from_user, from_bank), acct(to_user, to_bank),
                                amount, seq, user_key(from_user).sec);
    }

    Digest parent_of(const std::string& bank_name)
    {
        auto it = heads.find(bank_name);
        return it == heads.end() ? g.init_hash() : it->second;
    }

    Node build(const std::string& bank_name, NodeKind kind)
    {
        Node n;
        n.kind = kind;
        n.bank = bank(bank_name);
        n.seq = nseq.count(bank_name) ? nseq[bank_name] : 1;
        n.parent = parent_of(bank_name);
        return n;
    }

    Digest adopt(const std::string& bank_name, Node n)
    {
        sign_node(scheme, n, bank_key(bank_name).sec);
        auto res = g.insert(n);
        if (!res.inserted()) throw std::runtime_error("fixture insert failed: " + res.reason);
        heads[bank_name] = node_hash(n);
        nseq[bank_name] = n.seq + 1;
        return heads[bank_name];
    }

    Digest start(const std::string& bank_name, std::vector<Transaction> txs)
    {
        Node n = build(bank_name, NodeKind::Start);
        n.txs = std::move(txs);
        return adopt(bank_name, n);
    }

    Digest update(const std::string& bank_name, const std::vector<Digest>& targets)
    {
        Node n = build(bank_name, NodeKind::Update);
        for (const auto& d : targets) n.refs.push_back(g.ref_to(*g.index_of(d)));
        return adopt(bank_name, n);
    }

    Digest close(const std::string& bank_name) { return adopt(bank_name, build(bank_name, NodeKind::Close)); }
    Digest accept(const std::string& bank_name) { return adopt(bank_name, build(bank_name, NodeKind::Accept)); }

    /// Completes a solo block: start, close, accept with no cross references.
    Digest solo_block(const std::string& bank_name, std::vector<Transaction> txs)
    {
        start(bank_name, std::move(txs));
        close(bank_name);
        return accept(bank_name);
    }
};

/// Independent reachability oracle: explicit adjacency plus
/// Floyd-Warshall-style closure. Deliberately shares nothing with
/// Blockgraph's ancestry masks.
struct ClosureOracle {
    std::vector<std::vector<bool>> reach;

    explicit ClosureOracle(const Blockgraph& g)
    {
        std::size_t n = g.size();
        reach.assign(n, std::vector<bool>(n, false));
        for (std::size_t i = 0; i < n; ++i) {
            reach[i][i] = true;
            const auto& node = g.entry(i).node;
            if (node.kind == NodeKind::Init) continue;
            reach[i][*g.index_of(node.parent)] = true;
            for (const auto& r : node.refs) reach[i][*g.index_of(r.hash)] = true;
        }
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                if (reach[i][k])
                    for (std::size_t j = 0; j < n; ++j)
                        if (reach[k][j]) reach[i][j] = true;
    }

    bool acknowledges(std::size_t v, std::size_t w) const { return reach[v][w]; }
};

} // namespace bgl::fix
