// Sequential labeling workflow over the unsafe set. One draft is in flight
// at a time; the queue advances only when the server acknowledges a label,
// so an interrupted session loses at most the single unacknowledged draft.

import { ApiClient, UnsafeEntry } from "./api.js";

export type DraftState = "pending" | "acknowledged" | "failed";

export interface LabelDraft {
    imageId: string;
    label: string;
    state: DraftState;
}

export class LabelingQueue {
    private entries: UnsafeEntry[];
    draft: LabelDraft | null = null;

    constructor(entries: UnsafeEntry[]) {
        this.entries = [...entries];
    }

    /** Server state wins: rebuild from a fresh GET /api/unsafe. */
    refresh(entries: UnsafeEntry[]): void {
        this.entries = [...entries];
        this.draft = null;
    }

    get current(): UnsafeEntry | null {
        return this.entries.find((e) => e.label === null) ?? null;
    }

    get progress(): { labeled: number; total: number } {
        const labeled = this.entries.filter((e) => e.label !== null).length;
        return { labeled, total: this.entries.length };
    }

    get done(): boolean {
        return this.entries.length > 0 && this.current === null;
    }

    get inFlight(): boolean {
        return this.draft !== null && this.draft.state === "pending";
    }

    /** Neighbour entries from the same cluster, for reviewer context. */
    clusterContext(entry: UnsafeEntry, limit = 4): UnsafeEntry[] {
        return this.entries
            .filter((e) => e.cluster === entry.cluster && e.image_id !== entry.image_id)
            .slice(0, limit);
    }

    /**
     * Submit a label for the current entry. Resolves true when the server
     * acknowledged (queue advanced), false when the draft failed (kept for
     * retry). Rejects reentrant submissions while a draft is pending.
     */
    async submit(label: string, api: ApiClient): Promise<boolean> {
        const entry = this.current;
        if (entry === null) {
            throw new Error("nothing left to label");
        }
        if (this.inFlight) {
            throw new Error("a label submission is already in flight");
        }
        const draft: LabelDraft = { imageId: entry.image_id, label, state: "pending" };
        this.draft = draft;
        try {
            const ack = await api.postLabel(entry.image_id, label);
            draft.state = "acknowledged";
            entry.label = ack.label;
            this.draft = null;
            return true;
        } catch {
            draft.state = "failed";
            return false;
        }
    }

    /** A failed draft may be retried (resubmitted) or discarded. */
    async retry(api: ApiClient): Promise<boolean> {
        if (this.draft === null || this.draft.state !== "failed") {
            throw new Error("no failed draft to retry");
        }
        const label = this.draft.label;
        this.draft = null;
        return this.submit(label, api);
    }

    discardDraft(): void {
        this.draft = null;
    }
}
