#pragma once

// Actor, critic ensemble, target networks, behavior selection and the DDPG
// updates.

#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "../core/error.hpp"
#include "../core/rng.hpp"
#include "../nn/network.hpp"
#include "../nn/optim.hpp"
#include "../observe.hpp"
#include "../teachers.hpp"
#include "config.hpp"
#include "replay.hpp"

namespace vmms::rl {

using nn::Architecture;
using nn::HeadSpec;
using nn::LayerSpec;
using nn::Network;
using nn::Tensor;

namespace detail {

inline std::vector<LayerSpec> conv_stack(int in_ch, const TrainConfig& c)
{
    return {LayerSpec::conv(in_ch, c.conv1, 3, 2), LayerSpec::relu(), LayerSpec::conv(c.conv1, c.conv2, 3, 2),
            LayerSpec::relu(), LayerSpec::conv(c.conv2, c.conv3, 3, 2), LayerSpec::relu()};
}

/// The offset channels are in metres; they share the critic's position scale.
inline std::vector<LayerSpec> position_stack(const TrainConfig& c)
{
    auto layers = conv_stack(3, c);
    layers.insert(layers.begin(), LayerSpec::scale(c.state_input_scale));
    return layers;
}

inline std::size_t conv_out(std::size_t g)
{
    for (int k = 0; k < 3; ++k) g = (g - 3) / 2 + 1;
    return g;
}

inline std::vector<HeadSpec> image_heads(int grid, const TrainConfig& c)
{
    const auto g = static_cast<std::size_t>(grid);
    return {
        {"position", {3, g, g}, position_stack(c)},
        {"height", {1, g, g}, conv_stack(1, c)},
        {"pose", {2}, {LayerSpec::dense(2, c.head_width), LayerSpec::relu()}},
    };
}

inline int image_heads_width(int grid, const TrainConfig& c)
{
    const auto o = conv_out(static_cast<std::size_t>(grid));
    return static_cast<int>(2 * static_cast<std::size_t>(c.conv3) * o * o) + c.head_width;
}

} // namespace detail

inline Architecture actor_architecture(int grid, const TrainConfig& c = {})
{
    Architecture a;
    a.heads = detail::image_heads(grid, c);
    a.trunk = {LayerSpec::dense(detail::image_heads_width(grid, c), c.hidden),
               LayerSpec::relu(),
               LayerSpec::dense(c.hidden, c.hidden),
               LayerSpec::relu(),
               LayerSpec::dense(c.hidden, 2, c.actor_final_init),
               LayerSpec::tanh(),
               LayerSpec::scale(0.05)};
    return a;
}

/// Asymmetric critic: dense heads over the privileged state. Symmetric
/// critic: the actor's image heads. The action joins the concatenation
/// through an empty head.
inline Architecture critic_architecture(int grid, int max_objects, const TrainConfig& c = {})
{
    Architecture a;
    int width = 0;
    if (c.asymmetric) {
        const auto w = c.head_width;
        const auto k = LayerSpec::scale(c.state_input_scale);
        a.heads = {
            {"target_rel", {2}, {k, LayerSpec::dense(2, w), LayerSpec::relu()}},
            {"others_rel", {static_cast<std::size_t>(2 * max_objects)}, {k, LayerSpec::dense(2 * max_objects, w), LayerSpec::relu()}},
            {"ee_pose", {2}, {LayerSpec::dense(2, w), LayerSpec::relu()}},
        };
        width = 3 * w;
    } else {
        a.heads = detail::image_heads(grid, c);
        width = detail::image_heads_width(grid, c);
    }
    a.heads.push_back({"action", {2}, {LayerSpec::scale(c.action_input_scale)}});
    width += 2;
    a.trunk = {LayerSpec::dense(width, c.hidden), LayerSpec::relu(), LayerSpec::dense(c.hidden, c.hidden),
               LayerSpec::relu(), LayerSpec::dense(c.hidden, 1, c.critic_final_init), LayerSpec::scale(c.critic_output_scale)};
    return a;
}

// ---- batching --------------------------------------------------------------

inline std::vector<Tensor> actor_inputs(std::span<const Observation* const> obs)
{
    const std::size_t b = obs.size();
    const auto g = static_cast<std::size_t>(obs.front()->grid);
    Tensor pos({b, 3, g, g}), height({b, 1, g, g}), pose({b, 2});
    for (std::size_t i = 0; i < b; ++i) {
        std::copy(obs[i]->position.begin(), obs[i]->position.end(), pos.data.begin() + i * 3 * g * g);
        std::copy(obs[i]->height.begin(), obs[i]->height.end(), height.data.begin() + i * g * g);
        pose[2 * i] = obs[i]->ee_pose.x;
        pose[2 * i + 1] = obs[i]->ee_pose.y;
    }
    return {std::move(pos), std::move(height), std::move(pose)};
}

inline std::vector<Tensor> actor_inputs(const Observation& obs)
{
    const Observation* p = &obs;
    return actor_inputs(std::span<const Observation* const>(&p, 1));
}

inline std::vector<Tensor> privileged_inputs(std::span<const PrivilegedState* const> priv)
{
    const std::size_t b = priv.size();
    const std::size_t m = priv.front()->others_rel.size();
    Tensor t({b, 2}), o({b, m}), e({b, 2});
    for (std::size_t i = 0; i < b; ++i) {
        t[2 * i] = priv[i]->target_rel.x;
        t[2 * i + 1] = priv[i]->target_rel.y;
        std::copy(priv[i]->others_rel.begin(), priv[i]->others_rel.end(), o.data.begin() + i * m);
        e[2 * i] = priv[i]->ee_pose.x;
        e[2 * i + 1] = priv[i]->ee_pose.y;
    }
    return {std::move(t), std::move(o), std::move(e)};
}

inline Tensor action_tensor(std::span<const Action> actions)
{
    Tensor a({actions.size(), 2});
    for (std::size_t i = 0; i < actions.size(); ++i) {
        a[2 * i] = actions[i].delta.x;
        a[2 * i + 1] = actions[i].delta.y;
    }
    return a;
}

/// y = r + (1 - done) * gamma * q_next
inline std::vector<double> bellman_targets(std::span<const double> rewards, std::span<const char> dones,
                                           std::span<const double> q_next, double gamma)
{
    std::vector<double> y(rewards.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = rewards[i] + (dones[i] ? 0.0 : gamma * q_next[i]);
    return y;
}

inline double mean_squared_residual(std::span<const double> q, std::span<const double> y)
{
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) s += (q[i] - y[i]) * (q[i] - y[i]);
    return s / static_cast<double>(q.size());
}

/// Index of the highest score; ties go to the earliest candidate (the actor
/// is always candidate 0, teachers follow in fixed order).
inline std::size_t choose_candidate(std::span<const double> scores)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    return best;
}

struct CommitState {
    int member = 0;
    int episode_step = 0;
};

/// A prepared minibatch: all network inputs as tensors.
struct Batch {
    std::size_t size = 0;
    std::vector<Tensor> obs;
    std::vector<Tensor> next_obs;
    std::vector<Tensor> critic_state;      ///< critic inputs without the action
    std::vector<Tensor> next_critic_state;
    Tensor actions;
    std::vector<double> rewards;
    std::vector<char> dones;
};

class Agent {
public:
    Agent(const TrainConfig& cfg, const ObserveParams& obs_params, std::uint64_t seed)
        : cfg_(cfg), obs_params_(obs_params)
    {
        Rng init(derive_seed(seed, {0x1A17}));
        actor_ = Network(actor_architecture(obs_params.grid, cfg), init);
        actor_target_ = actor_;
        const auto carch = critic_architecture(obs_params.grid, obs_params.max_objects, cfg);
        for (int e = 0; e < cfg.ensemble; ++e) {
            Rng member_rng(derive_seed(seed, {0xC817, static_cast<std::uint64_t>(e)}));
            critics_.emplace_back(carch, member_rng);
            critic_targets_.push_back(critics_.back());
        }
    }

    const TrainConfig& config() const { return cfg_; }
    const ObserveParams& observe_params() const { return obs_params_; }
    int ensemble_size() const { return static_cast<int>(critics_.size()); }

    Network& actor() { return actor_; }
    Network& actor_target() { return actor_target_; }
    Network& critic(int e) { return critics_.at(static_cast<std::size_t>(e)); }
    Network& critic_target(int e) { return critic_targets_.at(static_cast<std::size_t>(e)); }

    /// Deterministic actor output.
    Action act(const Observation& obs)
    {
        const Tensor y = actor_.forward(actor_inputs(obs));
        return Action{{y[0], y[1]}};
    }

    /// Critic inputs (without the action) for one sample.
    std::vector<Tensor> critic_state(const Observation& obs, const PrivilegedState& priv) const
    {
        if (cfg_.asymmetric) {
            const PrivilegedState* p = &priv;
            return privileged_inputs(std::span<const PrivilegedState* const>(&p, 1));
        }
        return actor_inputs(obs);
    }

    /// Q_e for several candidate actions in one state.
    std::vector<double> score(int e, const Observation& obs, const PrivilegedState& priv,
                              std::span<const Action> candidates)
    {
        auto state = critic_state(obs, priv);
        const std::size_t n = candidates.size();
        std::vector<Tensor> inputs;
        for (const auto& t : state) inputs.push_back(repeat_rows(t, n));
        inputs.push_back(action_tensor(candidates));
        const Tensor q = critic(e).forward(inputs);
        return {q.data.begin(), q.data.end()};
    }

    Batch make_batch(std::span<const Transition* const> items) const
    {
        Batch b;
        b.size = items.size();
        std::vector<const Observation*> o, no;
        std::vector<const PrivilegedState*> p, np;
        std::vector<Action> a;
        for (const auto* t : items) {
            o.push_back(t->obs.get());
            no.push_back(t->next_obs.get());
            p.push_back(&t->priv);
            np.push_back(&t->next_priv);
            a.push_back(t->action);
            b.rewards.push_back(t->reward);
            b.dones.push_back(t->done ? 1 : 0);
        }
        b.obs = actor_inputs(o);
        b.next_obs = actor_inputs(no);
        if (cfg_.asymmetric) {
            b.critic_state = privileged_inputs(p);
            b.next_critic_state = privileged_inputs(np);
        } else {
            b.critic_state = b.obs;
            b.next_critic_state = b.next_obs;
        }
        b.actions = action_tensor(a);
        return b;
    }

    /// Bellman residual loss for member e; accumulates its gradients when asked.
    double critic_loss(int e, const Batch& b, const Tensor& next_actions, bool grads)
    {
        auto next_in = b.next_critic_state;
        next_in.push_back(next_actions);
        const Tensor q_next = critic_target(e).forward(next_in);
        const auto y = bellman_targets(b.rewards, b.dones, q_next.data, cfg_.gamma);

        auto in = b.critic_state;
        in.push_back(b.actions);
        Network& net = critic(e);
        const Tensor q = net.forward(in);
        const double loss = mean_squared_residual(q.data, y);
        if (!std::isfinite(loss)) throw divergence_error("divergence detected (critic " + std::to_string(e) + " loss)");
        if (grads) {
            Tensor g({b.size, 1});
            for (std::size_t i = 0; i < b.size; ++i) g[i] = 2.0 * (q[i] - y[i]) / static_cast<double>(b.size);
            net.zero_grad();
            net.backward(g);
        }
        return loss;
    }

    Tensor target_actions(const Batch& b) { return actor_target_.forward(b.next_obs); }

    /// -mean_batch (1/E) sum_e Q_e(s, pi(s)); accumulates actor gradients only.
    double actor_loss(const Batch& b, bool grads)
    {
        const Tensor a = actor_.forward(b.obs);
        const double inv = 1.0 / (static_cast<double>(b.size) * static_cast<double>(critics_.size()));
        Tensor grad_a({b.size, 2});
        double total = 0.0;
        for (auto& net : critics_) {
            auto in = b.critic_state;
            in.push_back(a);
            const Tensor q = net.forward(in);
            for (double v : q.data) total += v;
            if (grads) {
                Tensor g({b.size, 1}, -inv);
                auto input_grads = net.backward(g, {.params = false, .inputs = true});
                const Tensor& ga = input_grads.back();
                for (std::size_t i = 0; i < ga.size(); ++i) grad_a[i] += ga[i];
            }
        }
        const double loss = -total * inv;
        if (!std::isfinite(loss)) throw divergence_error("divergence detected (actor loss)");
        if (grads) {
            actor_.zero_grad();
            actor_.backward(grad_a);
        }
        return loss;
    }

    /// One critic update per member, one actor update, then soft target updates.
    void update(const Batch& b)
    {
        const Tensor next_a = target_actions(b);
        for (int e = 0; e < ensemble_size(); ++e) {
            critic_loss(e, b, next_a, true);
            nn::adam_step(critic(e), cfg_.lr_critic);
        }
        actor_loss(b, true);
        nn::adam_step(actor_, cfg_.lr_actor);
        nn::soft_update(actor_target_, actor_, cfg_.tau);
        for (int e = 0; e < ensemble_size(); ++e) nn::soft_update(critic_target(e), critic(e), cfg_.tau);
    }

private:
    static Tensor repeat_rows(const Tensor& t, std::size_t n)
    {
        nn::Shape s = t.shape;
        s[0] = n;
        Tensor out(s);
        const std::size_t row = t.row_size();
        for (std::size_t i = 0; i < n; ++i) std::copy(t.data.begin(), t.data.begin() + row, out.data.begin() + i * row);
        return out;
    }

    TrainConfig cfg_;
    ObserveParams obs_params_;
    Network actor_;
    Network actor_target_;
    std::vector<Network> critics_;
    std::vector<Network> critic_targets_;
};

/// Behavior source: 0 is the actor, k > 0 is teacher k-1.
struct BehaviorChoice {
    Action action;
    std::size_t source = 0;
    std::vector<double> scores;
};

/// Scores the noisy actor candidate and every teacher proposal under one
/// Thompson-drawn critic, held for commit_window steps.
inline BehaviorChoice select_behavior_action(const Observation& obs, const PrivilegedState& priv, const WorldState& state,
                                             Agent& agent, std::span<Teacher> teachers, Rng& rng, CommitState& commit)
{
    const auto& cfg = agent.config();
    if (commit.episode_step % cfg.commit_window == 0)
        commit.member = static_cast<int>(rng.index(static_cast<std::uint64_t>(agent.ensemble_size())));
    ++commit.episode_step;

    std::vector<Action> candidates;
    const Action a = agent.act(obs);
    candidates.push_back(Action::clamped(
        {a.delta.x + rng.normal(0.0, cfg.noise_sigma), a.delta.y + rng.normal(0.0, cfg.noise_sigma)}));
    for (auto& t : teachers) candidates.push_back(t.propose(state));

    BehaviorChoice out;
    if (candidates.size() == 1) {
        out.action = candidates[0];
        out.scores = {0.0};
        return out;
    }
    out.scores = agent.score(commit.member, obs, priv, candidates);
    out.source = choose_candidate(out.scores);
    out.action = candidates[out.source];
    return out;
}

} // namespace vmms::rl
