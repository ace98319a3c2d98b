// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numeric>
#include <string>

#include "gpart/errors.hpp"
#include "gpart/rng.hpp"
#include "gpart/trainer.hpp"

namespace gpart {

TrainRecord finetune(Adapter& adapter, const Mlp& net, const WeightVector& w0, const TaskData& task,
                     const FinetuneOptions& options, const StepObserver& observer) {
    if (!(adapter.manifest() == net.manifest())) {
        throw CompatibilityError("adapter manifest does not match the network");
    }
    if (w0.size() != net.manifest().total()) {
        throw ManifestError("w0 length " + std::to_string(w0.size()) + " != manifest total " +
                            std::to_string(net.manifest().total()));
    }
    if (options.batch_size == 0) {
        throw ParameterError("batch_size must be >= 1");
    }
    TrainRecord record;
    if (options.epochs == 0) {
        return record;
    }
    if (task.train.empty() || task.dev.empty()) {
        throw ParameterError("fine-tuning needs non-empty train and dev splits");
    }

    const std::size_t batches = (task.train.size() + options.batch_size - 1) / options.batch_size;
    const std::size_t total_steps = batches * options.epochs;
    OptimizerState opt(adapter.count_trainable(), options.lr, options.weight_decay);

    std::vector<double> best(adapter.params().begin(), adapter.params().end());
    double best_acc = -1.0;
    std::vector<std::size_t> order = task.train;
    std::size_t step = 0;

    for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
        SplitMix64 rng(derive_seed(options.seed, epoch));
        fisher_yates(std::span<std::size_t>(order), rng);

        double loss_sum = 0.0;
        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t begin = b * options.batch_size;
            const std::size_t end = std::min(order.size(), begin + options.batch_size);
            const std::span<const std::size_t> batch(order.data() + begin, end - begin);

            const WeightVector w = merge(adapter, w0);
            LossGrad lg;
            try {
                lg = loss_and_grad(net, w.span(), task, batch);
            } catch (const NumericError& e) {
                throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(b) + ": " + e.what());
            }
            if (!std::isfinite(lg.loss)) {
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " batch " + std::to_string(b));
            }
            const std::vector<double> grad = adapter.pullback_grad(lg.grad);
            if (observer) {
                observer(StepInfo{epoch, b, lg.loss, norm2(lg.grad.span()), norm2(grad)});
            }
            opt.lr = options.lr * lr_multiplier(options.schedule, step, total_steps, options.warmup_ratio);
            adamw_step(opt, adapter.params(), grad);
            loss_sum += lg.loss * static_cast<double>(batch.size());
            ++step;
        }

        const WeightVector w = merge(adapter, w0);
        Evaluation dev;
        try {
            dev = evaluate(net, w.span(), task, task.dev);
        } catch (const NumericError& e) {
            throw NumericError("epoch " + std::to_string(epoch) + " dev evaluation: " + e.what());
        }
        record.train_loss.push_back(loss_sum / static_cast<double>(task.train.size()));
        record.dev_loss.push_back(dev.loss);
        record.dev_acc.push_back(dev.accuracy);
        if (dev.accuracy > best_acc) {
            best_acc = dev.accuracy;
            record.best_epoch = epoch;
            best.assign(adapter.params().begin(), adapter.params().end());
        }
    }
    if (options.select_best) {
        adapter.set_params(best);
    } else {
        record.best_epoch = options.epochs;
    }
    return record;
}

WeightVector pretrain(const NetworkConfig& config, const TaskData& task, std::uint64_t init_seed,
                      const FinetuneOptions& options) {
    const Mlp net(config);
    const WeightVector init = init_weights(config, init_seed);
    FullFTAdapter full(net.manifest());
    finetune(full, net, init, task, options);
    return merge(full, init);
}

}  // namespace gpart
