// Flipbook playback state for one cluster. Frames advance in manifest
// order; the default rate shows 100 images per minute (600 ms per frame).
// Pure state machine so the scheduling logic is testable without a DOM.

export const DEFAULT_RATE_PER_MINUTE = 100;
export const INSPECTION_EMPHASIS_COUNT = 5;

export function framePeriodMs(ratePerMinute: number): number {
    return 60000 / ratePerMinute;
}

export class Flipbook {
    private index = 0;
    private rate: number;
    private missing = new Set<string>();
    playing = false;

    constructor(public readonly members: string[],
                ratePerMinute: number = DEFAULT_RATE_PER_MINUTE) {
        if (members.length === 0) {
            throw new Error("flipbook needs at least one member");
        }
        if (ratePerMinute <= 0) {
            throw new Error("playback rate must be positive");
        }
        this.rate = ratePerMinute;
    }

    get currentIndex(): number {
        return this.index;
    }

    get currentFrame(): string {
        return this.members[this.index];
    }

    get ratePerMinute(): number {
        return this.rate;
    }

    get periodMs(): number {
        return framePeriodMs(this.rate);
    }

    /** Single-image clusters show a static frame with controls disabled. */
    get controlsEnabled(): boolean {
        return this.members.length > 1;
    }

    /** Rejects non-positive rates; the current rate stays unchanged. */
    setRate(ratePerMinute: number): boolean {
        if (!Number.isFinite(ratePerMinute) || ratePerMinute <= 0) {
            return false;
        }
        this.rate = ratePerMinute;
        return true;
    }

    /** The first few members carry a visual marker for reviewers. */
    isEmphasized(index: number): boolean {
        return index < INSPECTION_EMPHASIS_COUNT;
    }

    /** An image that failed to load gets a placeholder; playback continues. */
    markMissing(imageId: string): void {
        this.missing.add(imageId);
    }

    isMissing(imageId: string): boolean {
        return this.missing.has(imageId);
    }

    togglePlay(): boolean {
        if (!this.controlsEnabled) {
            return false;
        }
        this.playing = !this.playing;
        return this.playing;
    }

    pause(): void {
        this.playing = false;
    }

    /** Advance one frame, wrapping at the end. */
    tick(): string {
        if (this.controlsEnabled) {
            this.index = (this.index + 1) % this.members.length;
        }
        return this.currentFrame;
    }

    step(delta: number): string {
        if (this.controlsEnabled) {
            const n = this.members.length;
            this.index = ((this.index + delta) % n + n) % n;
        }
        return this.currentFrame;
    }
}
