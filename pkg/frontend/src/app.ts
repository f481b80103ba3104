/** DOM wiring for the character studio. All state lives in the controller;
 * this file only renders it and forwards events. */

import { StudioApi } from "./api.js";
import { StudioController, clamp01 } from "./state.js";

const api = new StudioApi("");
const studio = new StudioController(api);

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
}

const galleryEl = byId<HTMLDivElement>("gallery");
const errorEl = byId<HTMLDivElement>("error");
const sampleBtn = byId<HTMLButtonElement>("sample");
const blendA = byId<HTMLSelectElement>("blend-a");
const blendB = byId<HTMLSelectElement>("blend-b");
const blendT = byId<HTMLInputElement>("blend-t");
const blendTLabel = byId<HTMLSpanElement>("blend-t-value");
const blendPreview = byId<HTMLImageElement>("blend-preview");
const keepBtn = byId<HTMLButtonElement>("keep");
const benchIdentity = byId<HTMLSelectElement>("bench-identity");
const benchPrompt = byId<HTMLInputElement>("bench-prompt");
const benchSeedLock = byId<HTMLInputElement>("bench-seed-lock");
const benchSeed = byId<HTMLInputElement>("bench-seed");
const benchSubmit = byId<HTMLButtonElement>("bench-submit");
const benchStrip = byId<HTMLDivElement>("bench-strip");
const exportBtn = byId<HTMLButtonElement>("bench-export");
const healthEl = byId<HTMLSpanElement>("health");

function option(value: string, text: string): HTMLOptionElement {
  const el = document.createElement("option");
  el.value = value;
  el.textContent = text;
  return el;
}

function fillSelect(select: HTMLSelectElement): void {
  const previous = select.value;
  select.replaceChildren();
  for (const card of studio.cards) {
    select.append(option(card.id, `${card.id} (${card.label})`));
  }
  if (studio.cards.some((c) => c.id === previous)) {
    select.value = previous;
  }
}

function renderGallery(): void {
  galleryEl.replaceChildren();
  for (const card of studio.cards) {
    const tile = document.createElement("div");
    tile.className = "card";
    const img = document.createElement("img");
    if (card.preview_image) {
      img.src = api.imageUrl(card.preview_image);
    }
    img.alt = card.label;
    const caption = document.createElement("div");
    caption.className = "caption";
    caption.textContent = `${card.id} · ${card.label}`;
    const remove = document.createElement("button");
    remove.textContent = "delete";
    remove.addEventListener("click", async () => {
      await api.deleteIdentity(card.id).catch(() => undefined);
      await studio.refresh();
    });
    tile.append(img, caption, remove);
    galleryEl.append(tile);
  }
}

function renderStrip(): void {
  benchStrip.replaceChildren();
  const entries = studio.history.get(benchIdentity.value) ?? [];
  for (const entry of entries) {
    const cell = document.createElement("figure");
    const img = document.createElement("img");
    if (entry.image) {
      img.src = api.imageUrl(entry.image);
    }
    img.alt = entry.prompt;
    const cap = document.createElement("figcaption");
    cap.textContent = `seed ${entry.seed} · ${entry.prompt}`;
    cell.append(img, cap);
    benchStrip.append(cell);
  }
}

function render(): void {
  errorEl.textContent = studio.error ?? "";
  errorEl.hidden = studio.error === null;
  document.body.classList.toggle("busy", studio.busy > 0);
  renderGallery();
  fillSelect(blendA);
  fillSelect(blendB);
  fillSelect(benchIdentity);
  if (studio.slider?.previewImage) {
    blendPreview.src = api.imageUrl(studio.slider.previewImage);
    blendPreview.hidden = false;
  } else {
    blendPreview.hidden = true;
  }
  keepBtn.disabled = !studio.slider || studio.slider.kept || studio.busy > 0;
  renderStrip();
}

studio.subscribe(render);

sampleBtn.addEventListener("click", () => {
  void studio.sampleCharacter();
});

blendT.addEventListener("input", () => {
  blendTLabel.textContent = Number(blendT.value).toFixed(2);
});

// Commit on release only: dragging never queues a render.
let sliderTimer: number | undefined;
blendT.addEventListener("change", () => {
  window.clearTimeout(sliderTimer);
  sliderTimer = window.setTimeout(() => {
    if (blendA.value && blendB.value) {
      void studio.commitSlider(blendA.value, blendB.value, clamp01(Number(blendT.value)));
    }
  }, 150);
});

keepBtn.addEventListener("click", () => {
  void studio.keepCharacter();
});

benchIdentity.addEventListener("change", renderStrip);

benchSubmit.addEventListener("click", () => {
  const seedText = benchSeed.value.trim();
  const seed = seedText === "" ? undefined : Number(seedText);
  void studio
    .submitPrompt(benchIdentity.value, benchPrompt.value, benchSeedLock.checked, seed)
    .then((entry) => {
      if (entry) {
        benchSeed.value = String(entry.seed);
      }
    });
});

exportBtn.addEventListener("click", () => {
  const rows = studio.exportStory(benchIdentity.value);
  const blob = new Blob([JSON.stringify(rows, null, 2)], { type: "application/json" });
  const link = document.createElement("a");
  link.href = URL.createObjectURL(blob);
  link.download = `${benchIdentity.value}-story.json`;
  link.click();
  URL.revokeObjectURL(link.href);
});

async function boot(): Promise<void> {
  try {
    const health = await api.health();
    healthEl.textContent = `${health.base_model_id} · step ${health.step}`;
  } catch {
    healthEl.textContent = "server unreachable";
  }
  await studio.refresh();
}

void boot();
