/** Studio state: a pure projection of server state plus in-flight jobs.
 * Nothing here generates content; refresh() rebuilds everything from GET
 * endpoints, and actions never invent ids the server did not return. */

import { ApiError, IdentityCard, StudioApi } from "./api.js";

export const PLACEHOLDER = "{ID}";

export function clamp01(t: number): number {
  if (Number.isNaN(t)) {
    return 0;
  }
  return Math.min(1, Math.max(0, t));
}

/** The server requires the marker exactly once; a prompt typed without it
 * gets the character appended rather than a rejection. */
export function ensurePlaceholder(prompt: string): string {
  const text = prompt.trim();
  if (text.includes(PLACEHOLDER)) {
    return text;
  }
  return text === "" ? `a photo of ${PLACEHOLDER}` : `${text}, ${PLACEHOLDER}`;
}

export interface HistoryEntry {
  job: string;
  prompt: string;
  seed: number;
  image: string | null;
}

export interface StoryRow {
  index: number;
  prompt: string;
  seed: number;
  image: string | null;
}

/** Ordered export manifest for one identity's history strip. */
export function storyManifest(history: HistoryEntry[]): StoryRow[] {
  return history.map((entry, index) => ({
    index,
    prompt: entry.prompt,
    seed: entry.seed,
    image: entry.image,
  }));
}

export interface SliderState {
  a: string;
  b: string;
  t: number;
  previewId: string | null;
  previewImage: string | null;
  kept: boolean;
}

export interface Projection {
  cards: Array<{ id: string; label: string; preview: string | null }>;
  history: Record<string, string[]>;
}

type Listener = () => void;

export class StudioController {
  cards: IdentityCard[] = [];
  history = new Map<string, HistoryEntry[]>();
  slider: SliderState | null = null;
  lastSeed = new Map<string, number>();
  error: string | null = null;
  busy = 0;

  private listeners: Listener[] = [];

  constructor(readonly api: StudioApi) {}

  subscribe(fn: Listener): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) {
      fn();
    }
  }

  private fail(err: unknown): void {
    this.error = err instanceof Error ? err.message : String(err);
    this.emit();
  }

  private async act<T>(work: () => Promise<T>): Promise<T | null> {
    this.error = null;
    this.busy += 1;
    this.emit();
    try {
      return await work();
    } catch (err) {
      this.fail(err);
      return null;
    } finally {
      this.busy -= 1;
      this.emit();
    }
  }

  /** Rebuild the whole projection from GET endpoints only. */
  async refresh(): Promise<void> {
    await this.act(async () => {
      const cards = await this.api.listIdentities();
      const history = new Map<string, HistoryEntry[]>();
      for (const card of cards) {
        const jobs = await this.api.listJobs(card.id);
        history.set(
          card.id,
          jobs
            .filter((job) => job.kind === "render")
            .map((job) => ({ job: job.id, prompt: job.prompt, seed: job.seed, image: job.image })),
        );
      }
      this.cards = cards;
      this.history = history;
    });
  }

  /** One click, one card; the id comes from the server or not at all. */
  async sampleCharacter(label?: string): Promise<string | null> {
    return this.act(async () => {
      const created = await this.api.sampleIdentity(label === undefined ? {} : { label });
      await this.api.pollJob(created.preview_job);
      await this.refreshCard(created.id);
      return created.id;
    });
  }

  private async refreshCard(id: string): Promise<void> {
    const card = await this.api.getIdentity(id);
    const at = this.cards.findIndex((c) => c.id === id);
    if (at >= 0) {
      this.cards[at] = card;
    } else {
      this.cards.push(card);
    }
    if (!this.history.has(id)) {
      this.history.set(id, []);
    }
    this.emit();
  }

  /** Commit-on-release: one preview identity per committed t, the previous
   * uncommitted one is deleted so sliding never accumulates cards. */
  async commitSlider(a: string, b: string, t: number): Promise<void> {
    const clamped = clamp01(t);
    await this.act(async () => {
      if (this.slider && this.slider.previewId && !this.slider.kept) {
        await this.api.deleteIdentity(this.slider.previewId);
      }
      const created = await this.api.interpolate(a, b, clamped);
      const card = await this.api.getIdentity(created.id);
      let image: string | null = null;
      if (card.preview_job) {
        const job = await this.api.pollJob(card.preview_job);
        image = job.image;
      }
      this.slider = { a, b, t: clamped, previewId: created.id, previewImage: image, kept: false };
    });
  }

  /** Persist the current blend as a first-class character. */
  async keepCharacter(): Promise<string | null> {
    const slider = this.slider;
    if (!slider || !slider.previewId) {
      return null;
    }
    return this.act(async () => {
      slider.kept = true;
      await this.refreshCard(slider.previewId as string);
      return slider.previewId;
    });
  }

  /** Render one prompt; with the seed lock on, the same seed is reused so
   * the exact image reproduces. Returns the history entry. */
  async submitPrompt(
    identityId: string,
    promptText: string,
    seedLock: boolean,
    seed?: number,
  ): Promise<HistoryEntry | null> {
    return this.act(async () => {
      const prompt = ensurePlaceholder(promptText);
      const locked = seedLock ? (seed ?? this.lastSeed.get(identityId) ?? 0) : seed;
      const ticket = await this.api.requestRender({ identity: identityId, prompt, seed: locked });
      const job = await this.api.pollJob(ticket.job);
      if (job.status === "failed") {
        throw new ApiError(500, job.error ?? "render failed");
      }
      this.lastSeed.set(identityId, job.seed);
      const entry: HistoryEntry = { job: job.id, prompt, seed: job.seed, image: job.image };
      const strip = this.history.get(identityId) ?? [];
      strip.push(entry);
      this.history.set(identityId, strip);
      return entry;
    });
  }

  exportStory(identityId: string): StoryRow[] {
    return storyManifest(this.history.get(identityId) ?? []);
  }

  /** Comparable snapshot: two controllers agree iff the server state they
   * project agrees. */
  projection(): Projection {
    const history: Record<string, string[]> = {};
    for (const [id, entries] of this.history) {
      history[id] = entries.map((e) => e.job);
    }
    return {
      cards: this.cards.map((c) => ({
        id: c.id,
        label: c.label,
        preview: c.preview_image ?? null,
      })),
      history,
    };
  }
}
