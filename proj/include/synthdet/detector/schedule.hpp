#pragma once

#include <string>
#include <vector>

#include "synthdet/core/errors.hpp"

namespace synthdet::detector {

struct TrainSchedule {
    double beta1 = 0.9;
    double beta2 = 0.999;
    int batch_size = 64;
    double lr_initial = 1e-4;
    double drop_factor = 0.1;
    int plateau_patience = 5;
    double plateau_threshold = 0.001;  // 0.1% absolute validation accuracy
    double lr_min = 1e-6;
    int max_epochs = 400;
};

inline void validate_schedule(const TrainSchedule& s) {
    if (!(s.drop_factor > 0.0 && s.drop_factor < 1.0))
        throw ValidationError("drop_factor must be in (0,1)");
    if (!(s.lr_min <= s.lr_initial)) throw ValidationError("lr_min must not exceed lr_initial");
    if (s.plateau_patience < 1) throw ValidationError("plateau_patience must be >= 1");
    if (s.batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (s.max_epochs < 1) throw ValidationError("max_epochs must be >= 1");
    if (s.plateau_threshold < 0.0) throw ValidationError("plateau_threshold must be >= 0");
    if (!(s.lr_initial > 0.0)) throw ValidationError("lr_initial must be positive");
}

// Pure plateau tracker: feed one validation accuracy per epoch, read the
// learning rate for the next epoch. The first epoch sets the baseline and
// counts toward the plateau, so a flat trace at patience p drops after epoch p.
class PlateauScheduler {
  public:
    enum class Action { none, drop, stop };

    explicit PlateauScheduler(const TrainSchedule& s) : s_(s), lr_(s.lr_initial) {
        validate_schedule(s);
    }

    double lr() const { return lr_; }
    int epoch() const { return epoch_; }
    bool stopped() const { return stopped_; }

    Action observe(double val_accuracy) {
        if (stopped_) throw StageError("scheduler already terminated");
        ++epoch_;
        if (epoch_ == 1) {
            best_ = val_accuracy;
            stale_ = 1;
        } else if (val_accuracy >= best_ + s_.plateau_threshold) {
            best_ = val_accuracy;
            stale_ = 0;
        } else {
            ++stale_;
        }
        if (stale_ >= s_.plateau_patience) {
            stale_ = 0;
            if (lr_ * s_.drop_factor < s_.lr_min * (1.0 - 1e-12)) {
                stopped_ = true;
                return Action::stop;
            }
            lr_ *= s_.drop_factor;
            return Action::drop;
        }
        return Action::none;
    }

  private:
    TrainSchedule s_;
    double lr_;
    double best_ = 0.0;
    int stale_ = 0;
    int epoch_ = 0;
    bool stopped_ = false;
};

struct ScheduleReplay {
    std::vector<double> epoch_lrs;   // lr in effect during each consumed epoch
    std::vector<int> drop_epochs;    // 1-based epochs whose observation dropped the lr
    int stop_epoch = 0;              // 0 if the trace ran out before termination
};

inline ScheduleReplay replay_schedule(const TrainSchedule& schedule,
                                      const std::vector<double>& accuracy_trace) {
    PlateauScheduler sched(schedule);
    ScheduleReplay replay;
    for (double acc : accuracy_trace) {
        replay.epoch_lrs.push_back(sched.lr());
        const auto action = sched.observe(acc);
        if (action == PlateauScheduler::Action::drop) {
            replay.drop_epochs.push_back(sched.epoch());
        } else if (action == PlateauScheduler::Action::stop) {
            replay.stop_epoch = sched.epoch();
            break;
        }
        if (sched.epoch() >= schedule.max_epochs) {
            replay.stop_epoch = sched.epoch();
            break;
        }
    }
    return replay;
}

}  // namespace synthdet::detector
