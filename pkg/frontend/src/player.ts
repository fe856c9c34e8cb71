/** Cyclic frame sequencer for preview playback.
 *
 * Emits frame indices 0..count-1 in order, wrapping, at the configured
 * frame rate. The scheduler is injectable so the sequencing contract is
 * testable without timers or a DOM.
 */

export interface Scheduler {
  set(fn: () => void, ms: number): unknown;
  clear(handle: unknown): void;
}

const wallClock: Scheduler = {
  set: (fn, ms) => setInterval(fn, ms),
  clear: (handle) => clearInterval(handle as ReturnType<typeof setInterval>),
};

export class FramePlayer {
  private handle: unknown = null;
  private index = 0;

  constructor(
    readonly count: number,
    readonly frameRate: number,
    private readonly sched: Scheduler = wallClock,
  ) {
    if (!Number.isInteger(count) || count < 1) throw new Error(`player: bad frame count ${count}`);
    if (!(frameRate > 0)) throw new Error(`player: bad frame rate ${frameRate}`);
  }

  get playing(): boolean {
    return this.handle !== null;
  }

  /** Show frame 0 immediately, then advance in order at the frame rate. */
  start(onFrame: (index: number) => void): void {
    this.stop();
    this.index = 0;
    onFrame(0);
    this.handle = this.sched.set(() => {
      this.index = (this.index + 1) % this.count;
      onFrame(this.index);
    }, 1000 / this.frameRate);
  }

  stop(): void {
    if (this.handle !== null) {
      this.sched.clear(this.handle);
      this.handle = null;
    }
  }
}
